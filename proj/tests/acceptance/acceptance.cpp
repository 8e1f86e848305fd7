// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
// usage: acceptance_tests <path to airtrack cli>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "airtrack/deepekf.hpp"
#include "airtrack/evaluation.hpp"
#include "airtrack/io.hpp"
#include "airtrack/kinematic.hpp"
#include "airtrack/mwis.hpp"
#include "airtrack/pipeline.hpp"
#include "airtrack/scenario.hpp"
#include "airtrack/training.hpp"
#include "airtrack/visual.hpp"

using namespace airtrack;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 -------------------------------------------------------------------

Outcome mwis_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int mismatches = 0, invalid = 0;
  for (int i = 0; i < 200; ++i) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    ConflictGraph g(static_cast<std::size_t>(n));
    for (auto& w : g.weights) w = rng.uniform(0.1, 10.0);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng.bernoulli(0.3)) g.add_edge(a, b);
    const MwisResult exact = solve_mwis(g);
    const MwisResult brute = mwis_bruteforce(g);
    if (exact.total != brute.total) ++mismatches;
    if (!is_independent(g, exact.vertices)) ++invalid;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && invalid == 0 && secs < 5.0,
          fmt("200 graphs, %d weight mismatches, %d dependent sets, %.2f s", mismatches, invalid, secs)};
}

// ---- 2 -------------------------------------------------------------------

Outcome gaussian_correctness() {
  const double ref = 1.0 / (2.0 * std::numbers::pi);
  const Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  const double kf0 = kinematic::kf_likelihood(Eigen::Vector2d::Zero(), eye);

  const double floor = 0.01;
  deepekf::LatentPrediction pred;
  pred.mean = Eigen::Vector2d::Zero();
  pred.log_variance = Eigen::Vector2d::Constant(std::log(1.0 - floor));
  const double dk0 = deepekf::dekf_affinity(pred, Eigen::Vector2d::Zero(), floor);

  // Midpoint rule on [-10, 10]^2 with an anisotropic, correlated covariance
  // for the filter and a diagonal one for the latent model.
  Eigen::Matrix2d s;
  s << 2.0, 0.6, 0.6, 1.0;
  deepekf::LatentPrediction aniso;
  aniso.mean = Eigen::Vector2d(0.3, -0.2);
  aniso.log_variance = Eigen::Vector2d(std::log(1.5), std::log(0.4));
  const int n = 800;
  const double lo = -10.0, h = 20.0 / n;
  double kf_mass = 0.0, dk_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d p(lo + (i + 0.5) * h, lo + (j + 0.5) * h);
      kf_mass += kinematic::kf_likelihood(p, s);
      dk_mass += deepekf::dekf_affinity(aniso, p, floor);
    }
  }
  kf_mass *= h * h;
  dk_mass *= h * h;
  const bool pass = std::abs(kf0 - ref) <= 1e-12 && std::abs(dk0 - ref) <= 1e-12 &&
                    std::abs(kf_mass - 1.0) <= 1e-3 && std::abs(dk_mass - 1.0) <= 1e-3;
  return {pass, fmt("zero residual |kf-1/2pi|=%.1e |dekf-1/2pi|=%.1e, mass kf=%.6f dekf=%.6f",
                    std::abs(kf0 - ref), std::abs(dk0 - ref), kf_mass, dk_mass)};
}

// ---- 3 -------------------------------------------------------------------

Outcome gradient_checks() {
  std::string detail;
  bool pass = true;
  auto record = [&](const char* name, double err, double secs) {
    pass = pass && err < 1e-4 && secs < 60.0;
    detail += fmt("%s%s %.2e (%.1f s)", detail.empty() ? "" : ", ", name, err, secs);
  };
  for (auto cell : {nn::CellType::kGru, nn::CellType::kLstm}) {
    const auto t0 = Clock::now();
    deepekf::DeepEkfConfig cfg;
    cfg.cell = cell;
    deepekf::DeepEkfModel m(cfg, 1);
    Rng rng(2);
    const auto batch = training::make_dekf_examples(m, 4, {}, rng);
    const double err = deepekf::gradient_check(m, batch, 1e-3, 200, 3);
    record(cell == nn::CellType::kGru ? "dekf-gru" : "dekf-lstm", err, seconds_since(t0));
  }
  for (bool attention : {true, false}) {
    const auto t0 = Clock::now();
    visual::SiameseConfig cfg;
    cfg.attention_enabled = attention;
    visual::SiameseModel m(cfg, 4);
    Rng rng(5);
    const auto pairs = training::make_pairs(cfg, 2, 2, rng);
    const double err = visual::gradient_check(m, pairs, 1.0, 1e-3, 200, 6);
    record(attention ? "siamese-attn" : "siamese", err, seconds_since(t0));
  }
  return {pass, detail};
}

// ---- 4 -------------------------------------------------------------------

// Same recipe as `airtrack train-dekf` with its defaults.
struct DekfRun {
  std::shared_ptr<deepekf::DeepEkfModel> model;
  training::DekfTrainReport report;
  double ranking = 0.0;
  double secs = 0.0;
};

DekfRun train_dekf() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 3;
  DekfRun run;
  run.model = std::make_shared<deepekf::DeepEkfModel>(deepekf::DeepEkfConfig{}, seed);
  Rng rng(seed + 4);
  const auto train = training::make_dekf_examples(*run.model, 64, {}, rng);
  const auto held = training::make_dekf_examples(*run.model, 100, {}, rng);
  run.report = training::train_dekf(*run.model, train, 500, {0.01, 5.0});
  Rng decoys(seed + 5);
  run.ranking = training::dekf_ranking_accuracy(*run.model, held, 3, decoys);
  run.secs = seconds_since(t0);
  return run;
}

Outcome dekf_learning(const DekfRun& run) {
  const double ratio = run.report.final_loss / run.report.initial_loss;
  const bool pass = run.report.initial_loss > 0.0 && ratio < 0.5 && run.ranking >= 0.9;
  return {pass, fmt("NLL %.4f -> %.4f (ratio %.3f), held-out ranking vs 3 decoys %.3f, %.1f s",
                    run.report.initial_loss, run.report.final_loss, ratio, run.ranking, run.secs)};
}

// ---- 5 -------------------------------------------------------------------

// Same recipe as `airtrack train-reid` with its defaults.
struct ReidRun {
  std::shared_ptr<visual::SiameseModel> model;
  double secs = 0.0;
};

ReidRun train_siamese() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 11;
  ReidRun run;
  run.model = std::make_shared<visual::SiameseModel>(visual::SiameseConfig{}, seed);
  Rng rng(seed + 6);
  training::train_reid(*run.model, 1000, 8, 8, 1.0, {0.05, 5.0}, rng);
  run.secs = seconds_since(t0);
  return run;
}

Outcome siamese_learning(const ReidRun& run) {
  Rng rng(99);
  const auto split = training::make_reid_split(run.model->config(), 5, 3, rng);
  const auto res = visual::evaluate_reid(*run.model, split.queries, split.gallery);
  // Pooled vs mean-pooled embedding on the query chips.
  double min_rel = INFINITY;
  for (const auto& q : split.queries) {
    const auto a = visual::embed(*run.model, q.chip);
    const auto b = visual::mean_pooled_embedding(*run.model, q.chip);
    min_rel = std::min(min_rel, (a.values - b.values).norm() / std::max(a.values.norm(), 1e-300));
  }
  const bool pass = res.rank1 >= 0.95 && res.mean_ap >= 0.90 && min_rel > 1e-3;
  return {pass, fmt("rank-1 %.3f, mAP %.3f on %zu queries / %zu gallery; min |attn - mean pool| / |attn| = %.3f; "
                    "training %.1f s",
                    res.rank1, res.mean_ap, split.queries.size(), split.gallery.size(), min_rel, run.secs)};
}

// ---- 6 -------------------------------------------------------------------

eval::TrackRecord constant_track(std::int64_t id, std::int64_t from, std::int64_t to, BoundingBox box) {
  eval::TrackRecord t;
  t.id = id;
  for (std::int64_t f = from; f < to; ++f) t.boxes[f] = box;
  return t;
}

Outcome eao_fixtures() {
  const BoundingBox box{0, 0, 10, 10};
  const std::vector<eval::TrackRecord> gt{constant_track(1, 0, 4, box)};
  const std::vector<eval::TrackRecord> pred{constant_track(9, 0, 2, box)};
  const double hand = eval::eao(gt, pred, 0.5, eval::IdMode::kOUID);
  const bool hand_ok = hand == 19.0 / 24.0 && eval::eao(gt, pred, 0.5, eval::IdMode::kAUID) == 19.0 / 24.0;

  Rng rng(606);
  bool perfect_ok = true;
  int order_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<eval::TrackRecord> truth;
    const int objects = static_cast<int>(rng.uniform_int(1, 4));
    for (int o = 0; o < objects; ++o) {
      eval::TrackRecord t;
      t.id = o + 1;
      const auto start = rng.uniform_int(0, 10);
      const auto len = rng.uniform_int(1, 30);
      for (std::int64_t f = start; f < start + len; ++f) {
        if (rng.bernoulli(0.1)) continue;
        t.boxes[f] = {60.0 * o + rng.uniform(-2, 2), rng.uniform(-2, 2), 10, 10};
      }
      if (!t.boxes.empty()) truth.push_back(t);
    }
    if (truth.empty()) continue;
    for (auto mode : {eval::IdMode::kOUID, eval::IdMode::kAUID}) {
      perfect_ok = perfect_ok && eval::eao(truth, truth, 0.5, mode) == 1.0;
    }
    // Jittered predictions with random id breaks, drops and swaps.
    std::vector<eval::TrackRecord> guess;
    std::int64_t next = 100;
    for (const auto& t : truth) {
      eval::TrackRecord p;
      p.id = next++;
      for (const auto& [f, b] : t.boxes) {
        if (rng.bernoulli(0.1)) {
          guess.push_back(p);
          p = {};
          p.id = next++;
        }
        if (rng.bernoulli(0.1)) continue;
        BoundingBox jb = b;
        jb.x += rng.uniform(-3, 3);
        p.boxes[f] = jb;
      }
      guess.push_back(p);
    }
    if (guess.size() > 1 && rng.bernoulli(0.3)) std::swap(guess.front().boxes, guess.back().boxes);
    const double o = eval::eao(truth, guess, 0.5, eval::IdMode::kOUID);
    const double a = eval::eao(truth, guess, 0.5, eval::IdMode::kAUID);
    if (o > a) ++order_violations;
  }
  return {hand_ok && perfect_ok && order_violations == 0,
          fmt("(1,1,0,0) fixture %.17g (19/24 = %.17g), perfect tracker %s, oUID > aUID in %d/100",
              hand, 19.0 / 24.0, perfect_ok ? "1.0" : "not 1.0", order_violations)};
}

// ---- 7 / 8 ---------------------------------------------------------------

pipeline::RunConfig shipped_config(const std::string& name) {
  return pipeline::load_config(fs::path(AIRTRACK_SOURCE_DIR) / "configs" / (name + ".json"));
}

// Every occlusion window of every object: the track id on the object's last
// detection before the window equals the id on its first reported detection
// within four frames after the window.
bool gaps_survived(const scenario::ScenarioSpec& spec, const scenario::Scenario& sc,
                   const pipeline::RunResult& r) {
  std::map<DetectionId, TrackId> tid;
  for (const auto& a : r.assignments) {
    if (a.detection_id) tid[*a.detection_id] = a.track_id;
  }
  for (std::size_t o = 0; o < spec.objects.size(); ++o) {
    for (const auto& w : spec.objects[o].occlusions) {
      std::optional<TrackId> before, after;
      for (const auto& d : sc.detections) {
        if (sc.truth_of_detection.at(d.detection_id) != static_cast<std::int64_t>(o) + 1) continue;
        const auto it = tid.find(d.detection_id);
        if (it == tid.end()) continue;
        if (d.frame_index < w.start) before = it->second;
        if (!after && d.frame_index >= w.end && d.frame_index < w.end + 4) after = it->second;
      }
      if (!before || !after || *before != *after) return false;
    }
  }
  return true;
}

struct Variant {
  std::string label;
  std::string config;
};

struct VariantStats {
  double mean_ouid = 0.0;
  int survived = 0;
};

std::map<std::string, VariantStats> run_variants(const std::string& preset, const std::vector<Variant>& variants,
                                                 const pipeline::Models& models, int seeds) {
  std::map<std::string, VariantStats> out;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto spec = scenario::preset(preset, static_cast<std::uint64_t>(seed));
    const auto sc = scenario::generate_scenario(spec);
    for (const auto& v : variants) {
      pipeline::RunConfig cfg = shipped_config(v.config);
      cfg.geometry = {spec.width, spec.height};
      const auto r = pipeline::run_tracking(cfg, sc.detections, models);
      auto& s = out[v.label];
      s.mean_ouid += eval::eao(sc.truth, r.tracks, 0.5, eval::IdMode::kOUID) / seeds;
      s.survived += gaps_survived(spec, sc, r) ? 1 : 0;
    }
  }
  return out;
}

Outcome runners_ordering(const pipeline::Models& models) {
  const auto t0 = Clock::now();
  const std::vector<Variant> variants{{"MHT[DEKF+attention]", "mht_dekf_siamese_attn"},
                                      {"MHT[EKF+SSD]", "mht_ekf_ssd"},
                                      {"Greedy[EKF]", "greedy_ekf"}};
  const auto stats = run_variants("runners", variants, models, 10);
  const double best = stats.at("MHT[DEKF+attention]").mean_ouid;
  const double ssd = stats.at("MHT[EKF+SSD]").mean_ouid;
  const double greedy = stats.at("Greedy[EKF]").mean_ouid;
  const double secs = seconds_since(t0);
  const bool pass = best - ssd >= 0.05 && best - greedy >= 0.05 && secs < 600.0;
  return {pass, fmt("oUID EAO over 10 seeds: MHT[DEKF+attention] %.4f, MHT[EKF+SSD] %.4f (margin %.4f), "
                    "Greedy[EKF] %.4f (margin %.4f); %.1f s",
                    best, ssd, best - ssd, greedy, best - greedy, secs)};
}

Outcome gap_survival(const pipeline::Models& models) {
  const std::vector<Variant> variants{{"MHT[DEKF+attention]", "mht_dekf_siamese_attn"},
                                      {"MHT[EKF+SSD]", "mht_ekf_ssd"}};
  const auto stats = run_variants("walkers", variants, models, 10);
  bool pass = true;
  std::string detail = "walkers, two 10-frame occlusions per run, max_misses=12:";
  for (const auto& v : variants) {
    const int n = stats.at(v.label).survived;
    pass = pass && n >= 8;
    detail += fmt(" %s %d/10", v.label.c_str(), n);
  }
  return {pass, detail};
}

// ---- 9 -------------------------------------------------------------------

std::map<std::string, std::uint64_t> tree_hashes(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::file_hash(e.path());
  }
  return out;
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome cli_determinism(const std::string& cli) {
  const auto t0 = Clock::now();
  const fs::path base = fs::absolute("acceptance_cli");
  fs::remove_all(base);
  std::vector<std::map<std::string, std::uint64_t>> hashes;
  for (const char* name : {"first", "second"}) {
    const fs::path d = base / name;
    fs::create_directories(d);
    {
      std::ofstream cfg(d / "dekf.json");
      cfg << R"({"comparators": ["dekf", "siamese_attn"],
                "checkpoints": {"dekf": "models/dekf.ckpt", "siamese_attn": "models/siamese_attn.ckpt"}})";
    }
    const std::string q = "'" + cli + "'";
    const std::string p = "'" + d.string() + "'";
    const std::vector<std::string> steps{
        q + " synth --preset runners --seed 5 --out " + p + "/data",
        q + " track --detections " + p + "/data/detections.csv --associator mht --comparators ekf,ssd --seed 1 --out " +
            p + "/ekf_ssd",
        q + " eval --gt " + p + "/data/truth.csv --pred " + p + "/ekf_ssd/tracks.csv --out " + p + "/ekf_ssd",
        q + " track --detections " + p + "/data/detections.csv --associator greedy --comparators ekf --out " + p +
            "/greedy",
        q + " eval --gt " + p + "/data/truth.csv --pred " + p + "/greedy/tracks.csv --out " + p + "/greedy",
        q + " train-dekf --steps 5 --examples 8 --out " + p + "/models",
        q + " train-reid --steps 3 --out " + p + "/models",
        q + " track --config " + p + "/dekf.json --detections " + p + "/data/detections.csv --out " + p + "/dekf",
        q + " eval --gt " + p + "/data/truth.csv --pred " + p + "/dekf/tracks.csv --out " + p + "/dekf",
    };
    for (const auto& s : steps) {
      if (run(s) != 0) return {false, "command failed: " + s};
    }
    hashes.push_back(tree_hashes(d));
  }
  int differing = 0;
  for (const auto& [file, h] : hashes[0]) {
    const auto it = hashes[1].find(file);
    if (it == hashes[1].end() || it->second != h) ++differing;
  }
  const bool pass = differing == 0 && hashes[0].size() == hashes[1].size() && hashes[0].size() > 10;
  return {pass, fmt("%zu output files per run, %d differ between runs; %.1f s", hashes[0].size(), differing,
                    seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <airtrack cli>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  int failures = 0;
  auto report = [&](int n, const char* what, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, what, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "MWIS oracle equivalence", mwis_oracle);
  report(2, "Gaussian correctness", gaussian_correctness);
  report(3, "gradient checks", gradient_checks);

  DekfRun dekf;
  ReidRun reid;
  report(4, "DeepEKF learning", [&] {
    dekf = train_dekf();
    return dekf_learning(dekf);
  });
  report(5, "Siamese learning", [&] {
    reid = train_siamese();
    return siamese_learning(reid);
  });
  report(6, "EAO fixtures", eao_fixtures);

  pipeline::Models models;
  models.dekf = dekf.model;
  models.siamese_attn = reid.model;
  report(7, "runners ordering", [&] {
    if (!models.dekf || !models.siamese_attn) return Outcome{false, "learned models unavailable"};
    return runners_ordering(models);
  });
  report(8, "gap survival", [&] {
    if (!models.dekf || !models.siamese_attn) return Outcome{false, "learned models unavailable"};
    return gap_survival(models);
  });
  report(9, "CLI determinism", [&] { return cli_determinism(cli); });

  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
