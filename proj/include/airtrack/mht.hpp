// Track-oriented multiple hypothesis tracking.
//
// One hypothesis tree per putative object. Each frame every leaf gets a child
// per gated detection and a missed-detection child, and every detection seeds
// a new tree. The best global hypothesis is the maximum weighted independent
// set over leaves (conflicts: shared detections, same tree), after which trees
// are pruned N frames back.
#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airtrack/core.hpp"
#include "airtrack/fuser.hpp"
#include "airtrack/kinematic.hpp"
#include "airtrack/mwis.hpp"

namespace airtrack {

// How leaf scores become MWIS vertex weights.
enum class LeafWeighting {
  // score - n_detections * new_track_log_penalty: log-likelihood ratio against
  // explaining every detection on the path as a separate birth. Only leaves
  // with a positive ratio become vertices.
  kBirthRatio,
  // score - min_score + 1 over all leaves.
  kShifted,
};

struct MhtConfig {
  double gate_threshold = kinematic::default_gate_threshold();
  int nscan = 3;
  int max_misses = 12;
  int confirm_hits = 2;
  int max_leaves_per_tree = 32;
  double new_track_log_penalty = std::log(0.1);
  double miss_log_penalty = std::log(0.3);
  std::size_t exact_cap = kDefaultExactCap;
  LeafWeighting weighting = LeafWeighting::kBirthRatio;

  void validate() const;
};

// Runs the comparators on a branch/detection pair and fuses the results.
class BranchScorer {
 public:
  BranchScorer(std::vector<std::shared_ptr<const SignatureComparator>> comparators,
               FusionConfig fusion);

  struct Result {
    double fused = 0.0;
    double log_score = 0.0;
    std::vector<ComparatorScore> scores;
  };
  Result score(const BranchView& branch, const Detection& det) const;

  const FusionConfig& fusion() const { return fusion_; }

 private:
  std::vector<std::shared_ptr<const SignatureComparator>> comparators_;
  FusionConfig fusion_;
};

struct TrackNode {
  int parent = -1;
  std::shared_ptr<const Detection> detection;  // null for a missed-detection node
  std::int64_t frame_index = 0;
  double increment = 0.0;
  double branch_log_score = 0.0;
  KinematicState kinematic;
  int misses = 0;       // consecutive
  int detections = 0;   // on the root path, inclusive
  std::shared_ptr<const ComparatorContext> dekf_context;
  double fused = 0.0;
  std::vector<ComparatorScore> scores;
};

enum class TreeStatus { kTentative, kConfirmed, kDead };

struct TrackTree {
  TrackId tree_id = 0;
  std::vector<TrackNode> nodes;  // nodes[0] is the root; parents precede children
  std::vector<int> leaves;
  std::int64_t birth_frame = 0;
  TreeStatus status = TreeStatus::kTentative;
  int consecutive_hits = 0;

  std::vector<int> path(int node) const;  // root first
  std::vector<DetectionId> detection_ids(int node) const;  // sorted
  BranchView view(int node, std::vector<const Detection*>& storage);
};

struct LeafRef {
  std::size_t tree = 0;  // index into the tree list
  int leaf = 0;          // node index
  friend bool operator==(const LeafRef&, const LeafRef&) = default;
};

struct LeafGraph {
  ConflictGraph graph;
  std::vector<LeafRef> vertices;
};

struct GlobalHypothesis {
  std::vector<LeafRef> selected;
  double total_log_score = 0.0;  // sum of selected branch_log_score
  double total_weight = 0.0;     // MWIS objective
  bool exact = true;             // false when the greedy fallback was used
};

struct Assignment {
  std::int64_t frame_index = 0;
  TrackId track_id = 0;
  std::optional<DetectionId> detection_id;  // empty = missed
  double fused = 0.0;
  std::vector<ComparatorScore> scores;
};

// Throws FrameOrderViolation unless every detection carries `frame_index` and
// it is later than every leaf.
void expand_trees(std::vector<TrackTree>& trees, std::int64_t frame_index,
                  std::span<const Detection> detections, const BranchScorer& scorer,
                  const NoiseConfig& noise, const MhtConfig& cfg, TrackId& next_tree_id);

LeafGraph build_conflict_graph(const std::vector<TrackTree>& trees, const MhtConfig& cfg);

GlobalHypothesis select_hypothesis(const std::vector<TrackTree>& trees, const LeafGraph& graph,
                                   const MhtConfig& cfg);

// Prunes selected trees to the descendants of their ancestor `nscan` frames
// back, removes leaves of other trees that use detections committed by that
// step, caps leaves per tree and drops trees with no leaves. `best` is
// rewritten to the new node indices.
void nscan_prune(std::vector<TrackTree>& trees, GlobalHypothesis& best, const MhtConfig& cfg);

class MhtTracker {
 public:
  MhtTracker(MhtConfig cfg, NoiseConfig noise, BranchScorer scorer);

  // Detections of one frame; frames must be strictly increasing. Output is
  // ordered by (frame, track id); a tree confirmed at this frame also reports
  // the earlier nodes on its selected path.
  std::vector<Assignment> process_frame(std::int64_t frame_index, std::span<const Detection> detections);

  const std::vector<TrackTree>& trees() const { return trees_; }
  const GlobalHypothesis& last_hypothesis() const { return best_; }
  int inexact_frames() const { return inexact_frames_; }

 private:
  MhtConfig cfg_;
  NoiseConfig noise_;
  BranchScorer scorer_;
  std::vector<TrackTree> trees_;
  GlobalHypothesis best_;
  TrackId next_tree_id_ = 1;
  std::optional<std::int64_t> last_frame_;
  int inexact_frames_ = 0;
};

}  // namespace airtrack
