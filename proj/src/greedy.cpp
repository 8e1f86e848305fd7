#include "airtrack/greedy.hpp"

#include <algorithm>
#include <tuple>

#include "airtrack/fuser.hpp"

namespace airtrack {

namespace {

Detection without_chip(const Detection& d) {
  Detection light = d;
  light.chip = Chip();
  return light;
}

}  // namespace

GreedyTracker::GreedyTracker(GreedyConfig cfg, NoiseConfig noise) : cfg_(cfg), noise_(noise) {
  if (!(cfg_.gate_threshold > 0.0) || cfg_.max_misses < 1) {
    throw Error(ErrorCode::kConfigError, "invalid greedy configuration");
  }
  if (!noise_.valid()) throw Error(ErrorCode::kConfigError, "noise values must be positive");
}

std::vector<Assignment> GreedyTracker::process_frame(std::int64_t frame_index,
                                                     std::span<const Detection> detections) {
  if (last_frame_ && frame_index <= *last_frame_) {
    throw Error(ErrorCode::kFrameOrderViolation,
                "frame " + std::to_string(frame_index) + " after " + std::to_string(*last_frame_));
  }
  for (const Detection& d : detections) {
    if (d.frame_index != frame_index) {
      throw Error(ErrorCode::kFrameOrderViolation, "detection frame differs from the processed frame");
    }
  }
  last_frame_ = frame_index;

  struct Candidate {
    double likelihood;
    double reference;
    TrackId track;
    std::size_t det;
  };
  std::map<TrackId, KinematicState> predicted;
  std::vector<Candidate> candidates;
  for (const auto& [id, track] : tracks_) {
    const double dt = static_cast<double>(frame_index - track.state.frame_index);
    const KinematicState p = kinematic::kf_predict(track.state, dt, noise_);
    predicted.emplace(id, p);
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const KalmanUpdate inn = kinematic::kf_innovation(p, detections[j].box, noise_);
      if (!kinematic::kf_gate(inn.innovation, inn.innovation_cov, cfg_.gate_threshold)) continue;
      candidates.push_back({kinematic::kf_likelihood(inn.innovation, inn.innovation_cov),
                            kinematic::likelihood_at_gate(inn.innovation_cov, cfg_.gate_threshold), id, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.likelihood != b.likelihood) return a.likelihood > b.likelihood;
    return std::tie(a.track, detections[a.det].detection_id) < std::tie(b.track, detections[b.det].detection_id);
  });

  std::vector<Assignment> out;
  std::map<TrackId, bool> track_used;
  std::vector<char> det_used(detections.size(), 0);
  for (const Candidate& c : candidates) {
    if (track_used[c.track] || det_used[c.det]) continue;
    track_used[c.track] = true;
    det_used[c.det] = 1;
    GreedyTrack& t = tracks_.at(c.track);
    const Detection& d = detections[c.det];
    t.state = kinematic::kf_update(predicted.at(c.track), d.box, noise_).state;
    t.tracklet.add(without_chip(d));
    Assignment a;
    a.frame_index = frame_index;
    a.track_id = c.track;
    a.detection_id = d.detection_id;
    const NormalizerSpec spec{NormalizerKind::kLikelihoodRatio, c.reference, false};
    a.fused = normalize(c.likelihood, spec);
    a.scores.push_back({"ekf", c.likelihood, a.fused});
    out.push_back(std::move(a));
  }
  for (auto it = tracks_.begin(); it != tracks_.end();) {
    if (track_used[it->first]) {
      ++it;
      continue;
    }
    it->second.state = predicted.at(it->first);
    it->second.tracklet.mark_missed(frame_index);
    if (it->second.tracklet.misses > cfg_.max_misses) {
      it = tracks_.erase(it);
      continue;
    }
    Assignment a;
    a.frame_index = frame_index;
    a.track_id = it->first;
    out.push_back(std::move(a));
    ++it;
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (det_used[j]) continue;
    GreedyTrack t;
    t.tracklet.track_id = next_id_;
    t.tracklet.add(without_chip(detections[j]));
    t.state = kinematic::kf_init(detections[j], noise_);
    Assignment a;
    a.frame_index = frame_index;
    a.track_id = next_id_;
    a.detection_id = detections[j].detection_id;
    a.fused = 1.0;
    out.push_back(std::move(a));
    tracks_.emplace(next_id_++, std::move(t));
  }
  std::sort(out.begin(), out.end(),
            [](const Assignment& a, const Assignment& b) { return a.track_id < b.track_id; });
  return out;
}

}  // namespace airtrack
