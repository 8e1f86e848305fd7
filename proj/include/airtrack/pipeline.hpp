// Run configuration and the detection -> association -> track record pipeline.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "airtrack/core.hpp"
#include "airtrack/deepekf.hpp"
#include "airtrack/evaluation.hpp"
#include "airtrack/fuser.hpp"
#include "airtrack/kinematic.hpp"
#include "airtrack/mht.hpp"
#include "airtrack/visual.hpp"

namespace airtrack::pipeline {

namespace fs = std::filesystem;

enum class AssociatorKind { kGreedy, kMht };

std::string_view to_string(AssociatorKind kind);
AssociatorKind parse_associator(std::string_view text);

// Comparator names: "ekf", "dekf", "ssd", "siamese" (mean-pooled embedding
// model) and "siamese_attn" (attention-pooled). Learned comparators need a
// checkpoint under the same name unless the model is supplied in memory.
struct RunConfig {
  AssociatorKind associator = AssociatorKind::kMht;
  std::vector<std::string> comparators{"ekf", "ssd"};
  NoiseConfig noise;
  MhtConfig mht;
  FusionConfig fusion;  // empty weights: defaults for the comparator set
  int chip_comparison_size = 100;
  std::map<std::string, std::string> checkpoints;
  std::uint64_t seed = 1;
  deepekf::FrameGeometry geometry;

  // Structural checks; throws ConfigError.
  void validate() const;
};

// 0.5 split between kinematic and visual comparators (even within a group),
// likelihood-ratio normalization at the gate for kinematic scores.
FusionConfig default_fusion(const std::vector<std::string>& comparators);
NormalizerSpec default_normalizer(const std::string& comparator);

// Missing keys keep their defaults; unknown keys are a ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const fs::path& path);
std::string to_json(const RunConfig& cfg);
void save_config(const fs::path& path, const RunConfig& cfg);

struct Models {
  std::shared_ptr<const deepekf::DeepEkfModel> dekf;
  std::shared_ptr<const visual::SiameseModel> siamese;
  std::shared_ptr<const visual::SiameseModel> siamese_attn;
};

// Loads checkpoints for the selected learned comparators that `preset` does
// not already provide. Relative paths resolve against `base`. Throws
// ConfigError when a required checkpoint is missing.
Models load_models(const RunConfig& cfg, const fs::path& base, Models preset = {});

struct RunResult {
  std::vector<Assignment> assignments;
  std::vector<eval::TrackRecord> tracks;
  int inexact_frames = 0;  // MHT frames solved by the greedy MWIS fallback
};

// Streams frames 0..last through the configured associator. Module errors are
// rethrown with the frame index prepended.
RunResult run_tracking(const RunConfig& cfg, const std::vector<Detection>& detections, const Models& models);

std::vector<eval::TrackRecord> tracks_from_assignments(const std::vector<Assignment>& assignments,
                                                       const std::vector<Detection>& detections);

}  // namespace airtrack::pipeline
