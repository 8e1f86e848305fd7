// Frame-by-frame greedy nearest-neighbour association on EKF likelihoods.
#pragma once

#include <map>
#include <span>
#include <vector>

#include "airtrack/core.hpp"
#include "airtrack/kinematic.hpp"
#include "airtrack/mht.hpp"

namespace airtrack {

struct GreedyConfig {
  double gate_threshold = kinematic::default_gate_threshold();
  int max_misses = 12;
};

struct GreedyTrack {
  Tracklet tracklet;
  KinematicState state;
};

class GreedyTracker {
 public:
  GreedyTracker(GreedyConfig cfg, NoiseConfig noise);

  // Assignments for every active track (detection or MISS) plus new tracks.
  // Ties in likelihood go to the lower track_id, then the lower detection_id.
  std::vector<Assignment> process_frame(std::int64_t frame_index, std::span<const Detection> detections);

  const std::map<TrackId, GreedyTrack>& tracks() const { return tracks_; }

 private:
  GreedyConfig cfg_;
  NoiseConfig noise_;
  std::map<TrackId, GreedyTrack> tracks_;
  TrackId next_id_ = 1;
  std::optional<std::int64_t> last_frame_;
};

}  // namespace airtrack
