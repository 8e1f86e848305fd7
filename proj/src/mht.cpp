#include "airtrack/mht.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_map>

namespace airtrack {

void MhtConfig::validate() const {
  if (!(gate_threshold > 0.0)) throw Error(ErrorCode::kConfigError, "gate_threshold must be > 0");
  if (nscan < 1) throw Error(ErrorCode::kConfigError, "nscan must be >= 1");
  if (max_misses < 1) throw Error(ErrorCode::kConfigError, "max_misses must be >= 1");
  if (confirm_hits < 1) throw Error(ErrorCode::kConfigError, "confirm_hits must be >= 1");
  if (max_leaves_per_tree < 1) throw Error(ErrorCode::kConfigError, "max_leaves_per_tree must be >= 1");
  if (!(new_track_log_penalty <= 0.0) || !(miss_log_penalty <= 0.0)) {
    throw Error(ErrorCode::kConfigError, "log penalties must be <= 0");
  }
  if (exact_cap < 1) throw Error(ErrorCode::kConfigError, "exact_cap must be >= 1");
}

BranchScorer::BranchScorer(std::vector<std::shared_ptr<const SignatureComparator>> comparators,
                           FusionConfig fusion)
    : comparators_(std::move(comparators)), fusion_(std::move(fusion)) {
  fusion_.normalize_weights();
  for (const auto& [name, w] : fusion_.weights) {
    const bool present = std::any_of(comparators_.begin(), comparators_.end(),
                                     [&](const auto& c) { return c->name() == name; });
    if (!present) throw Error(ErrorCode::kMissingComparator, "no comparator named '" + name + "'");
  }
}

BranchScorer::Result BranchScorer::score(const BranchView& branch, const Detection& det) const {
  Result out;
  std::map<std::string, double> normalized;
  for (const auto& c : comparators_) {
    const RawScore raw = c->compare(branch, det);
    const std::string name(c->name());
    const auto spec = fusion_.normalizers.find(name);
    const double n = normalize(raw, spec == fusion_.normalizers.end() ? NormalizerSpec{} : spec->second);
    normalized[name] = n;
    out.scores.push_back({name, raw.raw, n});
  }
  out.fused = fuse(normalized, fusion_);
  out.log_score = fused_log_score(out.fused, fusion_.epsilon);
  return out;
}

std::vector<int> TrackTree::path(int node) const {
  std::vector<int> out;
  for (int n = node; n >= 0; n = nodes[n].parent) out.push_back(n);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<DetectionId> TrackTree::detection_ids(int node) const {
  std::vector<DetectionId> out;
  for (int n = node; n >= 0; n = nodes[n].parent) {
    if (nodes[n].detection) out.push_back(nodes[n].detection->detection_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

BranchView TrackTree::view(int node, std::vector<const Detection*>& storage) {
  storage.clear();
  for (int n : path(node)) {
    if (nodes[n].detection) storage.push_back(nodes[n].detection.get());
  }
  return BranchView{storage, &nodes[node].kinematic, &nodes[node].dekf_context};
}

void expand_trees(std::vector<TrackTree>& trees, std::int64_t frame_index,
                  std::span<const Detection> detections, const BranchScorer& scorer,
                  const NoiseConfig& noise, const MhtConfig& cfg, TrackId& next_tree_id) {
  for (const Detection& d : detections) {
    if (d.frame_index != frame_index) {
      throw Error(ErrorCode::kFrameOrderViolation, "detection frame differs from the processed frame");
    }
  }
  for (const TrackTree& t : trees) {
    for (int leaf : t.leaves) {
      if (t.nodes[leaf].frame_index >= frame_index) {
        throw Error(ErrorCode::kFrameOrderViolation,
                    "frame " + std::to_string(frame_index) + " is not after tree " +
                        std::to_string(t.tree_id));
      }
    }
  }
  std::vector<std::shared_ptr<const Detection>> shared;
  shared.reserve(detections.size());
  for (const Detection& d : detections) shared.push_back(std::make_shared<const Detection>(d));

  std::vector<const Detection*> storage;
  for (TrackTree& tree : trees) {
    if (tree.status == TreeStatus::kDead) continue;
    std::vector<TrackNode> pending;
    for (int leaf : tree.leaves) {
      const double dt = static_cast<double>(frame_index - tree.nodes[leaf].frame_index);
      const KinematicState predicted = kinematic::kf_predict(tree.nodes[leaf].kinematic, dt, noise);
      const double parent_score = tree.nodes[leaf].branch_log_score;
      const int parent_dets = tree.nodes[leaf].detections;
      for (const auto& det : shared) {
        const KalmanUpdate inn = kinematic::kf_innovation(predicted, det->box, noise);
        if (!kinematic::kf_gate(inn.innovation, inn.innovation_cov, cfg.gate_threshold)) continue;
        BranchView view = tree.view(leaf, storage);
        view.kinematic = &predicted;
        BranchScorer::Result r = scorer.score(view, *det);
        TrackNode child;
        child.parent = leaf;
        child.detection = det;
        child.frame_index = frame_index;
        child.increment = r.log_score;
        child.branch_log_score = parent_score + r.log_score;
        child.kinematic = kinematic::kf_update(predicted, det->box, noise).state;
        child.detections = parent_dets + 1;
        child.fused = r.fused;
        child.scores = std::move(r.scores);
        pending.push_back(std::move(child));
      }
      const TrackNode& parent = tree.nodes[leaf];
      if (parent.misses + 1 <= cfg.max_misses) {
        TrackNode miss;
        miss.parent = leaf;
        miss.frame_index = frame_index;
        miss.increment = cfg.miss_log_penalty;
        miss.branch_log_score = parent_score + cfg.miss_log_penalty;
        miss.kinematic = predicted;
        miss.misses = parent.misses + 1;
        miss.detections = parent_dets;
        miss.dekf_context = parent.dekf_context;
        pending.push_back(std::move(miss));
      }
    }
    tree.leaves.clear();
    for (TrackNode& n : pending) {
      tree.leaves.push_back(static_cast<int>(tree.nodes.size()));
      tree.nodes.push_back(std::move(n));
    }
    if (tree.leaves.empty()) tree.status = TreeStatus::kDead;
  }
  std::erase_if(trees, [](const TrackTree& t) { return t.status == TreeStatus::kDead; });

  for (const auto& det : shared) {
    TrackTree tree;
    tree.tree_id = next_tree_id++;
    tree.birth_frame = frame_index;
    TrackNode root;
    root.detection = det;
    root.frame_index = frame_index;
    root.increment = cfg.new_track_log_penalty;
    root.branch_log_score = cfg.new_track_log_penalty;
    root.kinematic = kinematic::kf_init(*det, noise);
    root.detections = 1;
    tree.nodes.push_back(std::move(root));
    tree.leaves.push_back(0);
    trees.push_back(std::move(tree));
  }
}

LeafGraph build_conflict_graph(const std::vector<TrackTree>& trees, const MhtConfig& cfg) {
  struct Entry {
    LeafRef ref;
    double weight;
  };
  std::vector<Entry> entries;
  double min_score = 0.0;
  bool first = true;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    for (int leaf : trees[t].leaves) {
      const TrackNode& n = trees[t].nodes[leaf];
      if (cfg.weighting == LeafWeighting::kBirthRatio) {
        const double w = n.branch_log_score - n.detections * cfg.new_track_log_penalty;
        if (w > 0.0) entries.push_back({{t, leaf}, w});
      } else {
        entries.push_back({{t, leaf}, n.branch_log_score});
        min_score = first ? n.branch_log_score : std::min(min_score, n.branch_log_score);
        first = false;
      }
    }
  }
  if (cfg.weighting == LeafWeighting::kShifted) {
    for (Entry& e : entries) e.weight = e.weight - min_score + 1.0;
  }

  LeafGraph out;
  out.graph = ConflictGraph(entries.size());
  std::unordered_map<DetectionId, std::vector<int>> users;
  for (std::size_t v = 0; v < entries.size(); ++v) {
    out.vertices.push_back(entries[v].ref);
    out.graph.weights[v] = entries[v].weight;
    for (DetectionId id : trees[entries[v].ref.tree].detection_ids(entries[v].ref.leaf)) {
      users[id].push_back(static_cast<int>(v));
    }
  }
  for (std::size_t a = 0; a < entries.size(); ++a) {
    for (std::size_t b = a + 1; b < entries.size() && entries[b].ref.tree == entries[a].ref.tree; ++b) {
      out.graph.add_edge(static_cast<int>(a), static_cast<int>(b));
    }
  }
  for (const auto& [id, vs] : users) {
    for (std::size_t i = 0; i < vs.size(); ++i) {
      for (std::size_t j = i + 1; j < vs.size(); ++j) out.graph.add_edge(vs[i], vs[j]);
    }
  }
  return out;
}

GlobalHypothesis select_hypothesis(const std::vector<TrackTree>& trees, const LeafGraph& graph,
                                   const MhtConfig& cfg) {
  GlobalHypothesis out;
  MwisResult r;
  try {
    r = solve_mwis(graph.graph, cfg.exact_cap);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSizeLimit) throw;
    r = mwis_greedy(graph.graph);
    out.exact = false;
  }
  out.total_weight = r.total;
  for (int v : r.vertices) {
    const LeafRef ref = graph.vertices[v];
    out.selected.push_back(ref);
    out.total_log_score += trees[ref.tree].nodes[ref.leaf].branch_log_score;
  }
  return out;
}

namespace {

bool descends_from(const TrackTree& tree, int node, int ancestor) {
  for (int n = node; n >= ancestor; n = tree.nodes[n].parent) {
    if (n == ancestor) return true;
    if (n < 0) break;
  }
  return false;
}

bool uses_any(const TrackTree& tree, int leaf, const std::unordered_map<DetectionId, std::size_t>& committed,
              std::size_t owner) {
  for (int n = leaf; n >= 0; n = tree.nodes[n].parent) {
    if (!tree.nodes[n].detection) continue;
    const auto it = committed.find(tree.nodes[n].detection->detection_id);
    if (it != committed.end() && it->second != owner) return true;
  }
  return false;
}

// Drops unreachable nodes; returns old -> new index (-1 for dropped).
std::vector<int> compact(TrackTree& tree) {
  std::vector<char> keep(tree.nodes.size(), 0);
  for (int leaf : tree.leaves) {
    for (int n = leaf; n >= 0 && !keep[n]; n = tree.nodes[n].parent) keep[n] = 1;
  }
  std::vector<int> remap(tree.nodes.size(), -1);
  std::vector<TrackNode> kept;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<int>(kept.size());
    TrackNode n = std::move(tree.nodes[i]);
    if (n.parent >= 0) n.parent = remap[n.parent];
    kept.push_back(std::move(n));
  }
  tree.nodes = std::move(kept);
  for (int& leaf : tree.leaves) leaf = remap[leaf];
  return remap;
}

}  // namespace

void nscan_prune(std::vector<TrackTree>& trees, GlobalHypothesis& best, const MhtConfig& cfg) {
  std::vector<int> selected(trees.size(), -1);
  for (const LeafRef& r : best.selected) selected[r.tree] = r.leaf;

  std::unordered_map<DetectionId, std::size_t> committed;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    if (selected[t] < 0) continue;
    TrackTree& tree = trees[t];
    const std::vector<int> path = tree.path(selected[t]);
    const std::size_t anc_pos = path.size() > static_cast<std::size_t>(cfg.nscan)
                                    ? path.size() - 1 - static_cast<std::size_t>(cfg.nscan)
                                    : 0;
    const int ancestor = path[anc_pos];
    std::erase_if(tree.leaves, [&](int leaf) { return !descends_from(tree, leaf, ancestor); });
    if (path.size() > static_cast<std::size_t>(cfg.nscan)) {
      for (std::size_t i = 0; i <= anc_pos; ++i) {
        if (tree.nodes[path[i]].detection) committed[tree.nodes[path[i]].detection->detection_id] = t;
      }
    }
  }

  for (std::size_t t = 0; t < trees.size(); ++t) {
    TrackTree& tree = trees[t];
    std::erase_if(tree.leaves, [&](int leaf) {
      return leaf != selected[t] && uses_any(tree, leaf, committed, t);
    });
    if (static_cast<int>(tree.leaves.size()) > cfg.max_leaves_per_tree) {
      std::vector<int> order = tree.leaves;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if ((a == selected[t]) != (b == selected[t])) return a == selected[t];
        return tree.nodes[a].branch_log_score > tree.nodes[b].branch_log_score;
      });
      order.resize(static_cast<std::size_t>(cfg.max_leaves_per_tree));
      std::sort(order.begin(), order.end());
      tree.leaves = std::move(order);
    }
    const std::vector<int> remap = compact(tree);
    if (selected[t] >= 0) selected[t] = remap[selected[t]];
    if (tree.leaves.empty()) tree.status = TreeStatus::kDead;
  }

  std::vector<std::size_t> new_index(trees.size(), 0);
  std::size_t next = 0;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    new_index[t] = next;
    if (trees[t].status != TreeStatus::kDead) ++next;
  }
  for (LeafRef& r : best.selected) {
    r.leaf = selected[r.tree];
    r.tree = new_index[r.tree];
  }
  std::erase_if(trees, [](const TrackTree& t) { return t.status == TreeStatus::kDead; });
}

MhtTracker::MhtTracker(MhtConfig cfg, NoiseConfig noise, BranchScorer scorer)
    : cfg_(cfg), noise_(noise), scorer_(std::move(scorer)) {
  cfg_.validate();
  if (!noise_.valid()) throw Error(ErrorCode::kConfigError, "noise values must be positive");
}

std::vector<Assignment> MhtTracker::process_frame(std::int64_t frame_index,
                                                  std::span<const Detection> detections) {
  if (last_frame_ && frame_index <= *last_frame_) {
    throw Error(ErrorCode::kFrameOrderViolation,
                "frame " + std::to_string(frame_index) + " after " + std::to_string(*last_frame_));
  }
  last_frame_ = frame_index;
  expand_trees(trees_, frame_index, detections, scorer_, noise_, cfg_, next_tree_id_);
  const LeafGraph graph = build_conflict_graph(trees_, cfg_);
  best_ = select_hypothesis(trees_, graph, cfg_);
  if (!best_.exact) ++inexact_frames_;
  nscan_prune(trees_, best_, cfg_);

  std::vector<int> selected(trees_.size(), -1);
  for (const LeafRef& r : best_.selected) selected[r.tree] = r.leaf;
  std::vector<Assignment> out;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    TrackTree& tree = trees_[t];
    const bool hit = selected[t] >= 0 && tree.nodes[selected[t]].detection &&
                     tree.nodes[selected[t]].frame_index == frame_index;
    tree.consecutive_hits = hit ? tree.consecutive_hits + 1 : 0;
    bool confirmed_now = false;
    if (tree.status == TreeStatus::kTentative && tree.consecutive_hits >= cfg_.confirm_hits) {
      tree.status = TreeStatus::kConfirmed;
      confirmed_now = true;
    }
    if (tree.status != TreeStatus::kConfirmed || selected[t] < 0) continue;
    // A newly confirmed tree also reports its tentative history.
    const std::vector<int> nodes = confirmed_now ? tree.path(selected[t]) : std::vector<int>{selected[t]};
    for (int n : nodes) {
      const TrackNode& node = tree.nodes[n];
      Assignment a;
      a.frame_index = node.frame_index;
      a.track_id = tree.tree_id;
      if (node.detection) {
        a.detection_id = node.detection->detection_id;
        a.fused = node.fused;
        a.scores = node.scores;
      }
      out.push_back(std::move(a));
    }
  }
  std::sort(out.begin(), out.end(), [](const Assignment& a, const Assignment& b) {
    return std::tie(a.frame_index, a.track_id) < std::tie(b.frame_index, b.track_id);
  });
  return out;
}

}  // namespace airtrack
