// Seeded synthetic scenes: procedural identity chips, object trajectories
// with occlusion windows, detection noise and ground truth.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "airtrack/core.hpp"
#include "airtrack/evaluation.hpp"
#include "airtrack/rng.hpp"

namespace airtrack::scenario {

inline constexpr int kIdentityCount = 10;

// Per-rendering nuisance: global gain, pattern shift, additive pixel noise,
// and a per-object colour offset.
struct ChipNuisance {
  double gain = 1.0;
  int shift_x = 0;
  int shift_y = 0;
  double noise_std = 0.0;
  std::array<double, 3> jitter{0.0, 0.0, 0.0};
  std::uint64_t noise_seed = 0;
};

// Gain in [0.75, 1.25], shift in [-5, 5], noise 0.04; jitter is left as is.
ChipNuisance random_nuisance(Rng& rng, const std::array<double, 3>& jitter = {0.0, 0.0, 0.0});
std::array<double, 3> random_jitter(Rng& rng);

// RGB chip of `size` x `size`, values quantized to k/255.
Chip render_identity(int identity, const ChipNuisance& nuisance, int size = 64);

enum class MotionKind { kLinear, kCurved, kCrossing };

struct Window {
  std::int64_t start = 0;  // first frame
  std::int64_t end = 0;    // one past the last frame
  bool contains(std::int64_t f) const { return f >= start && f < end; }
};

struct ObjectSpec {
  int appearance = 0;
  MotionKind motion = MotionKind::kLinear;
  Point2 start;
  Point2 velocity;          // px / frame
  double turn_rate = 0.0;   // rad / frame, curved motion
  Point2 cross_offset;      // crossing motion: displacement added over cross_window
  Window cross_window;
  double box_w = 12.0;
  double box_h = 22.0;
  std::vector<Window> occlusions;
};

struct ScenarioSpec {
  std::string name = "custom";
  int frames = 100;
  double width = 640.0;
  double height = 480.0;
  std::vector<ObjectSpec> objects;
  double position_noise = 1.0;  // px, detection center
  double size_noise = 0.5;      // px, detection size
  double zoom_amplitude = 0.0;  // relative box/position scale about the image center
  double zoom_period = 80.0;    // frames
  Point2 camera_drift;          // px / frame applied to every object
  bool truth_present_when_occluded = false;
  bool with_platform = true;
  int chip_size = 64;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Scenario {
  std::vector<Detection> detections;  // ordered by frame, then detection_id
  std::vector<eval::TrackRecord> truth;
  std::map<DetectionId, std::int64_t> truth_of_detection;
  int frames = 0;
};

// Throws SpecError for invalid specs.
Scenario generate_scenario(const ScenarioSpec& spec);

// "runners": two near-identical objects in adjacent lanes that swap lanes
// during a joint 10-frame absence. "walkers": three distinct objects, two of
// them occluded for 10 frames. Throws SpecError for unknown names.
ScenarioSpec preset(const std::string& name, std::uint64_t seed);

// Detections grouped by frame for every frame in [0, frames).
std::vector<std::vector<Detection>> by_frame(const std::vector<Detection>& detections, int frames);

}  // namespace airtrack::scenario
