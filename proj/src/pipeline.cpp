#include "airtrack/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "airtrack/comparators.hpp"
#include "airtrack/greedy.hpp"
#include "airtrack/io.hpp"

namespace airtrack::pipeline {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownComparators{"ekf", "dekf", "ssd", "siamese", "siamese_attn"};

bool is_kinematic(const std::string& name) { return name == "ekf" || name == "dekf"; }
bool is_learned(const std::string& name) { return name == "dekf" || name == "siamese" || name == "siamese_attn"; }

[[noreturn]] void config_fail(const std::string& what) { throw Error(ErrorCode::kConfigError, what); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_fail(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) config_fail("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string_view to_string(LeafWeighting w) {
  return w == LeafWeighting::kBirthRatio ? "birth_ratio" : "shifted";
}

LeafWeighting parse_weighting(const std::string& s) {
  if (s == "birth_ratio") return LeafWeighting::kBirthRatio;
  if (s == "shifted") return LeafWeighting::kShifted;
  config_fail("unknown leaf weighting '" + s + "'");
}

}  // namespace

std::string_view to_string(AssociatorKind kind) { return kind == AssociatorKind::kGreedy ? "greedy" : "mht"; }

AssociatorKind parse_associator(std::string_view text) {
  if (text == "greedy") return AssociatorKind::kGreedy;
  if (text == "mht") return AssociatorKind::kMht;
  config_fail("unknown associator '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  if (comparators.empty()) config_fail("at least one comparator is required");
  std::set<std::string> seen;
  for (const auto& c : comparators) {
    if (!kKnownComparators.count(c)) config_fail("unknown comparator '" + c + "'");
    if (!seen.insert(c).second) config_fail("comparator '" + c + "' listed twice");
  }
  if (seen.count("siamese") && seen.count("siamese_attn")) {
    config_fail("choose one of 'siamese' and 'siamese_attn'");
  }
  if (associator == AssociatorKind::kGreedy && (comparators.size() != 1 || comparators[0] != "ekf")) {
    config_fail("the greedy associator only supports the 'ekf' comparator");
  }
  if (!noise.valid()) config_fail("noise standard deviations must be positive");
  if (chip_comparison_size < 1) config_fail("chip_comparison_size must be positive");
  if (!(geometry.width > 0.0 && geometry.height > 0.0)) config_fail("frame dimensions must be positive");
  try {
    mht.validate();
  } catch (const Error& e) {
    config_fail(e.what());
  }
  for (const auto& [name, w] : fusion.weights) {
    if (!seen.count(name)) config_fail("fusion weight for unselected comparator '" + name + "'");
  }
}

NormalizerSpec default_normalizer(const std::string& comparator) {
  if (is_kinematic(comparator)) return {NormalizerKind::kLikelihoodRatio, 1.0, true};
  if (comparator == "ssd") return {NormalizerKind::kExpNegScaled, 5000.0, false};
  return {NormalizerKind::kExpNegScaled, 1.0, false};
}

FusionConfig default_fusion(const std::vector<std::string>& comparators) {
  FusionConfig f;
  int kin = 0, vis = 0;
  for (const auto& c : comparators) (is_kinematic(c) ? kin : vis)++;
  for (const auto& c : comparators) {
    const bool k = is_kinematic(c);
    const double group = (kin > 0 && vis > 0) ? 0.5 : 1.0;
    f.weights[c] = group / (k ? kin : vis);
    f.normalizers[c] = default_normalizer(c);
  }
  return f;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_fail(std::string("invalid JSON: ") + e.what());
  }
  check_keys(j, {"associator", "comparators", "noise", "mht", "fusion", "chip_comparison_size", "checkpoints",
                 "seed", "frame"},
             "config");
  RunConfig cfg;
  if (j.contains("associator")) {
    std::string a;
    read(j, "associator", a);
    cfg.associator = parse_associator(a);
  }
  read(j, "comparators", cfg.comparators);
  if (j.contains("noise")) {
    const json& n = j["noise"];
    check_keys(n, {"process_std_pos", "process_std_vel", "measurement_std"}, "noise");
    read(n, "process_std_pos", cfg.noise.process_std_pos);
    read(n, "process_std_vel", cfg.noise.process_std_vel);
    read(n, "measurement_std", cfg.noise.measurement_std);
  }
  if (j.contains("mht")) {
    const json& m = j["mht"];
    check_keys(m, {"gate_threshold", "nscan", "max_misses", "confirm_hits", "max_leaves_per_tree",
                   "new_track_log_penalty", "miss_log_penalty", "exact_cap", "weighting"},
               "mht");
    read(m, "gate_threshold", cfg.mht.gate_threshold);
    read(m, "nscan", cfg.mht.nscan);
    read(m, "max_misses", cfg.mht.max_misses);
    read(m, "confirm_hits", cfg.mht.confirm_hits);
    read(m, "max_leaves_per_tree", cfg.mht.max_leaves_per_tree);
    read(m, "new_track_log_penalty", cfg.mht.new_track_log_penalty);
    read(m, "miss_log_penalty", cfg.mht.miss_log_penalty);
    read(m, "exact_cap", cfg.mht.exact_cap);
    if (m.contains("weighting")) {
      std::string w;
      read(m, "weighting", w);
      cfg.mht.weighting = parse_weighting(w);
    }
  }
  cfg.fusion = default_fusion(cfg.comparators);
  if (j.contains("fusion")) {
    const json& f = j["fusion"];
    check_keys(f, {"weights", "normalizers", "epsilon"}, "fusion");
    read(f, "epsilon", cfg.fusion.epsilon);
    if (f.contains("weights")) {
      std::map<std::string, double> w;
      read(f, "weights", w);
      cfg.fusion.weights = w;
    }
    if (f.contains("normalizers")) {
      check_keys(f["normalizers"], kKnownComparators, "fusion.normalizers");
      for (const auto& [name, spec] : f["normalizers"].items()) {
        check_keys(spec, {"kind", "scale", "scale_at_gate"}, "fusion.normalizers." + name);
        NormalizerSpec ns = default_normalizer(name);
        if (spec.contains("kind")) {
          std::string kind;
          read(spec, "kind", kind);
          ns.kind = parse_normalizer_kind(kind);
        }
        read(spec, "scale", ns.scale);
        read(spec, "scale_at_gate", ns.scale_at_gate);
        cfg.fusion.normalizers[name] = ns;
      }
    }
  }
  read(j, "chip_comparison_size", cfg.chip_comparison_size);
  read(j, "checkpoints", cfg.checkpoints);
  read(j, "seed", cfg.seed);
  if (j.contains("frame")) {
    check_keys(j["frame"], {"width", "height"}, "frame");
    read(j["frame"], "width", cfg.geometry.width);
    read(j["frame"], "height", cfg.geometry.height);
  }
  cfg.validate();
  try {
    cfg.fusion.normalize_weights();
  } catch (const Error& e) {
    config_fail(e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const RunConfig& cfg) {
  json j;
  j["associator"] = std::string(to_string(cfg.associator));
  j["comparators"] = cfg.comparators;
  j["noise"] = {{"process_std_pos", cfg.noise.process_std_pos},
                {"process_std_vel", cfg.noise.process_std_vel},
                {"measurement_std", cfg.noise.measurement_std}};
  j["mht"] = {{"gate_threshold", cfg.mht.gate_threshold},
              {"nscan", cfg.mht.nscan},
              {"max_misses", cfg.mht.max_misses},
              {"confirm_hits", cfg.mht.confirm_hits},
              {"max_leaves_per_tree", cfg.mht.max_leaves_per_tree},
              {"new_track_log_penalty", cfg.mht.new_track_log_penalty},
              {"miss_log_penalty", cfg.mht.miss_log_penalty},
              {"exact_cap", cfg.mht.exact_cap},
              {"weighting", std::string(to_string(cfg.mht.weighting))}};
  json norms = json::object();
  for (const auto& [name, ns] : cfg.fusion.normalizers) {
    norms[name] = {{"kind", std::string(to_string(ns.kind))}, {"scale", ns.scale}, {"scale_at_gate", ns.scale_at_gate}};
  }
  j["fusion"] = {{"weights", cfg.fusion.weights}, {"normalizers", norms}, {"epsilon", cfg.fusion.epsilon}};
  j["chip_comparison_size"] = cfg.chip_comparison_size;
  j["checkpoints"] = cfg.checkpoints;
  j["seed"] = cfg.seed;
  j["frame"] = {{"width", cfg.geometry.width}, {"height", cfg.geometry.height}};
  return j.dump(2) + "\n";
}

void save_config(const fs::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << to_json(cfg);
}

Models load_models(const RunConfig& cfg, const fs::path& base, Models preset) {
  auto path_of = [&](const std::string& name) {
    const auto it = cfg.checkpoints.find(name);
    if (it == cfg.checkpoints.end()) config_fail("comparator '" + name + "' needs a checkpoint");
    fs::path p(it->second);
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) config_fail("checkpoint for '" + name + "' not found: " + p.string());
    return p;
  };
  for (const auto& c : cfg.comparators) {
    if (!is_learned(c)) continue;
    if (c == "dekf" && !preset.dekf) {
      preset.dekf = std::make_shared<deepekf::DeepEkfModel>(io::load_deepekf(path_of(c)));
    } else if (c == "siamese" && !preset.siamese) {
      preset.siamese = std::make_shared<visual::SiameseModel>(io::load_siamese(path_of(c)));
    } else if (c == "siamese_attn" && !preset.siamese_attn) {
      preset.siamese_attn = std::make_shared<visual::SiameseModel>(io::load_siamese(path_of(c)));
    }
  }
  return preset;
}

namespace {

std::vector<std::shared_ptr<const SignatureComparator>> make_comparators(const RunConfig& cfg,
                                                                         const Models& models) {
  std::vector<std::shared_ptr<const SignatureComparator>> out;
  for (const auto& c : cfg.comparators) {
    if (c == "ekf") {
      out.push_back(std::make_shared<EkfComparator>(cfg.noise, cfg.mht.gate_threshold));
    } else if (c == "dekf") {
      if (!models.dekf) config_fail("no DeepEKF model loaded");
      out.push_back(std::make_shared<DeepEkfComparator>(models.dekf, cfg.noise, cfg.mht.gate_threshold,
                                                        cfg.geometry));
    } else if (c == "ssd") {
      out.push_back(std::make_shared<SsdComparator>(cfg.chip_comparison_size));
    } else if (c == "siamese") {
      if (!models.siamese) config_fail("no Siamese model loaded");
      out.push_back(std::make_shared<SiameseComparator>(models.siamese, "siamese"));
    } else if (c == "siamese_attn") {
      if (!models.siamese_attn) config_fail("no attention Siamese model loaded");
      out.push_back(std::make_shared<SiameseComparator>(models.siamese_attn, "siamese_attn"));
    }
  }
  return out;
}

}  // namespace

RunResult run_tracking(const RunConfig& cfg, const std::vector<Detection>& detections, const Models& models) {
  cfg.validate();
  FusionConfig fusion = cfg.fusion.weights.empty() ? default_fusion(cfg.comparators) : cfg.fusion;
  fusion.normalize_weights();

  std::map<std::int64_t, std::vector<Detection>> frames;
  for (const auto& d : detections) frames[d.frame_index].push_back(d);
  const std::int64_t last = frames.empty() ? -1 : frames.rbegin()->first;

  RunResult result;
  std::unique_ptr<GreedyTracker> greedy;
  std::unique_ptr<MhtTracker> mht;
  if (cfg.associator == AssociatorKind::kGreedy) {
    greedy = std::make_unique<GreedyTracker>(GreedyConfig{cfg.mht.gate_threshold, cfg.mht.max_misses}, cfg.noise);
  } else {
    mht = std::make_unique<MhtTracker>(cfg.mht, cfg.noise, BranchScorer(make_comparators(cfg, models), fusion));
  }
  static const std::vector<Detection> kNone;
  for (std::int64_t f = 0; f <= last; ++f) {
    const auto it = frames.find(f);
    const std::vector<Detection>& dets = it == frames.end() ? kNone : it->second;
    try {
      auto out = greedy ? greedy->process_frame(f, dets) : mht->process_frame(f, dets);
      result.assignments.insert(result.assignments.end(), std::make_move_iterator(out.begin()),
                                std::make_move_iterator(out.end()));
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(f) + ": " + e.what());
    }
  }
  std::stable_sort(result.assignments.begin(), result.assignments.end(),
                   [](const Assignment& a, const Assignment& b) { return a.frame_index < b.frame_index; });
  if (mht) result.inexact_frames = mht->inexact_frames();
  result.tracks = tracks_from_assignments(result.assignments, detections);
  return result;
}

std::vector<eval::TrackRecord> tracks_from_assignments(const std::vector<Assignment>& assignments,
                                                       const std::vector<Detection>& detections) {
  std::map<DetectionId, const Detection*> by_id;
  for (const auto& d : detections) by_id[d.detection_id] = &d;
  std::map<TrackId, eval::TrackRecord> tracks;
  for (const auto& a : assignments) {
    if (!a.detection_id) continue;
    const auto it = by_id.find(*a.detection_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kInvalidArgument, "assignment refers to unknown detection " +
                                                   std::to_string(*a.detection_id));
    }
    auto& rec = tracks[a.track_id];
    rec.id = a.track_id;
    rec.boxes[a.frame_index] = it->second->box;
  }
  std::vector<eval::TrackRecord> out;
  for (auto& [id, rec] : tracks) out.push_back(std::move(rec));
  return out;
}

}  // namespace airtrack::pipeline
