// airtrack command line: synth, track, eval, train-dekf, train-reid,
// reid-eval, gradcheck.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "airtrack/io.hpp"
#include "airtrack/pipeline.hpp"
#include "airtrack/scenario.hpp"
#include "airtrack/training.hpp"

namespace fs = std::filesystem;
using namespace airtrack;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("airtrack");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("AIRTRACK_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

struct SynthArgs {
  std::string preset = "runners";
  std::uint64_t seed = 1;
  std::string out = "synth";
};

void run_synth(const SynthArgs& a) {
  const auto spec = scenario::preset(a.preset, a.seed);
  const auto sc = scenario::generate_scenario(spec);
  const fs::path out(a.out);
  io::save_detections(out / "detections.csv", sc.detections, {spec.width, spec.height});
  io::save_tracks(out / "truth.csv", sc.truth);
  spdlog::info("{}: {} frames, {} detections, {} objects -> {}", a.preset, sc.frames, sc.detections.size(),
               sc.truth.size(), out.string());
}

struct TrackArgs {
  std::string config;
  std::string detections;
  std::string associator;
  std::string comparators;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
};

void run_track(const TrackArgs& a) {
  pipeline::RunConfig cfg;
  fs::path base = fs::current_path();
  if (!a.config.empty()) {
    cfg = pipeline::load_config(a.config);
    base = fs::path(a.config).parent_path();
  }
  if (!a.associator.empty()) cfg.associator = pipeline::parse_associator(a.associator);
  if (!a.comparators.empty()) {
    cfg.comparators = split_list(a.comparators);
    cfg.fusion = pipeline::default_fusion(cfg.comparators);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (cfg.fusion.weights.empty()) cfg.fusion = pipeline::default_fusion(cfg.comparators);
  cfg.validate();

  const auto set = io::load_detections(a.detections);
  if (set.missing_chips > 0) {
    spdlog::warn("{} detections have no chip file; zero chips used", set.missing_chips);
  }
  cfg.geometry = set.geometry;
  const auto models = pipeline::load_models(cfg, base);
  std::string names;
  for (const auto& c : cfg.comparators) names += (names.empty() ? "" : ",") + c;
  spdlog::info("tracking {} detections with {} [{}]", set.detections.size(), pipeline::to_string(cfg.associator),
               names);
  const auto result = pipeline::run_tracking(cfg, set.detections, models);
  if (result.inexact_frames > 0) {
    spdlog::warn("{} frames used the greedy hypothesis fallback", result.inexact_frames);
  }
  const fs::path out(a.out);
  io::save_assignments(out / "assignments.csv", result.assignments);
  io::save_tracks(out / "tracks.csv", result.tracks);
  pipeline::save_config(out / "run_config.json", cfg);
  spdlog::info("{} assignments, {} tracks -> {}", result.assignments.size(), result.tracks.size(), out.string());
}

struct EvalArgs {
  std::string gt;
  std::string pred;
  double iou_min = 0.5;
  std::string out = "eval";
};

void run_eval(const EvalArgs& a) {
  const auto gt = io::load_tracks(a.gt);
  const auto pred = io::load_tracks(a.pred);
  const auto rows = eval::evaluate(gt, pred, a.iou_min);
  io::save_metrics(fs::path(a.out) / "metrics.csv", rows);
  std::fputs(io::format_metrics(rows).c_str(), stdout);
}

struct TrainDekfArgs {
  std::uint64_t seed = 3;
  int steps = 500;
  double lr = 0.01;
  int examples = 64;
  std::string cell = "gru";
  std::string out = "models";
};

void run_train_dekf(const TrainDekfArgs& a) {
  deepekf::DeepEkfConfig cfg;
  if (a.cell != "gru" && a.cell != "lstm") throw Error(ErrorCode::kInvalidArgument, "cell must be gru or lstm");
  cfg.cell = a.cell == "gru" ? nn::CellType::kGru : nn::CellType::kLstm;
  deepekf::DeepEkfModel model(cfg, a.seed);
  Rng rng(a.seed + 4);
  const auto train = training::make_dekf_examples(model, a.examples, {}, rng);
  const auto held = training::make_dekf_examples(model, 100, {}, rng);
  const auto report = training::train_dekf(model, train, a.steps, {a.lr, 5.0});
  Rng decoy_rng(a.seed + 5);
  const double ranking = training::dekf_ranking_accuracy(model, held, 3, decoy_rng);
  const fs::path out(a.out);
  io::save_model(out / "dekf.ckpt", model);
  std::string log = "step,loss\n";
  for (std::size_t i = 0; i < report.losses.size(); ++i) log += std::to_string(i) + "," + std::to_string(report.losses[i]) + "\n";
  write_text(out / "dekf_train.csv", log);
  std::printf("initial_loss %.6f\nfinal_loss %.6f\nheld_out_ranking %.4f\n", report.initial_loss, report.final_loss,
              ranking);
}

struct TrainReidArgs {
  std::uint64_t seed = 11;
  int steps = 1000;
  double lr = 0.05;
  bool no_attention = false;
  std::string out = "models";
};

void run_train_reid(const TrainReidArgs& a) {
  visual::SiameseConfig cfg;
  cfg.attention_enabled = !a.no_attention;
  visual::SiameseModel model(cfg, a.seed);
  Rng rng(a.seed + 6);
  const auto report = training::train_reid(model, a.steps, 8, 8, 1.0, {a.lr, 5.0}, rng);
  const fs::path out(a.out);
  const std::string name = a.no_attention ? "siamese" : "siamese_attn";
  io::save_model(out / (name + ".ckpt"), model);
  std::string log = "step,loss\n";
  for (std::size_t i = 0; i < report.losses.size(); ++i) log += std::to_string(i) + "," + std::to_string(report.losses[i]) + "\n";
  write_text(out / (name + "_train.csv"), log);
  std::printf("probe_initial_loss %.6f\nprobe_final_loss %.6f\n", report.initial_loss, report.final_loss);
}

struct ReidEvalArgs {
  std::string checkpoint;
  std::uint64_t seed = 99;
  int gallery_per_id = 5;
  int queries_per_id = 3;
  std::string out = "reid";
};

void run_reid_eval(const ReidEvalArgs& a) {
  const auto model = io::load_siamese(a.checkpoint);
  Rng rng(a.seed);
  const auto split = training::make_reid_split(model.config(), a.gallery_per_id, a.queries_per_id, rng);
  const auto res = visual::evaluate_reid(model, split.queries, split.gallery);
  const fs::path out(a.out);
  char buf[128];
  std::snprintf(buf, sizeof buf, "rank1,mean_ap\n%.17g,%.17g\n", res.rank1, res.mean_ap);
  write_text(out / "reid_metrics.csv", buf);
  // Embeddings for external visualization.
  std::string emb = "split,identity,embedding\n";
  auto dump = [&](const char* tag, const std::vector<visual::LabeledChip>& chips) {
    for (const auto& c : chips) {
      const auto e = visual::embed(model, c.chip);
      emb += std::string(tag) + "," + std::to_string(c.identity) + ",";
      for (Eigen::Index i = 0; i < e.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.17g", i ? " " : "", e.values[i]);
        emb += buf;
      }
      emb += "\n";
    }
  };
  dump("query", split.queries);
  dump("gallery", split.gallery);
  write_text(out / "embeddings.csv", emb);
  std::printf("rank1 %.4f\nmean_ap %.4f\n", res.rank1, res.mean_ap);
}

struct GradcheckArgs {
  std::string model = "dekf";
  int samples = 200;
  double eps = 1e-3;
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

int run_gradcheck(const GradcheckArgs& a) {
  double err = 0.0;
  if (a.model == "dekf" || a.model == "dekf-lstm") {
    deepekf::DeepEkfConfig cfg;
    cfg.cell = a.model == "dekf" ? nn::CellType::kGru : nn::CellType::kLstm;
    deepekf::DeepEkfModel model(cfg, a.seed);
    Rng rng(a.seed + 1);
    const auto batch = training::make_dekf_examples(model, 4, {}, rng);
    err = deepekf::gradient_check(model, batch, a.eps, a.samples, a.seed + 2);
  } else if (a.model == "siamese" || a.model == "siamese-attn") {
    visual::SiameseConfig cfg;
    cfg.attention_enabled = a.model == "siamese-attn";
    visual::SiameseModel model(cfg, a.seed);
    Rng rng(a.seed + 1);
    const auto pairs = training::make_pairs(cfg, 2, 2, rng);
    err = visual::gradient_check(model, pairs, 1.0, a.eps, a.samples, a.seed + 2);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown model '" + a.model + "'");
  }
  std::printf("max_relative_error %.3e\n", err);
  return err < a.tol ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multi-object tracking with hypothesis trees and learned signature comparators"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a seeded synthetic scenario");
  s->add_option("--preset", synth.preset, "runners or walkers")->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->capture_default_str();

  TrackArgs track;
  auto* t = app.add_subcommand("track", "Associate detections into tracks");
  t->add_option("--config", track.config, "Run configuration JSON")->check(CLI::ExistingFile);
  t->add_option("--detections", track.detections, "Detection file")->required()->check(CLI::ExistingFile);
  t->add_option("--associator", track.associator, "greedy or mht");
  t->add_option("--comparators", track.comparators, "Comma-separated comparator names");
  t->add_option("--seed", track.seed);
  t->add_option("--out", track.out, "Output directory")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predicted tracks against ground truth");
  e->add_option("--gt", ev.gt)->required()->check(CLI::ExistingFile);
  e->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  e->add_option("--iou-min", ev.iou_min)->capture_default_str();
  e->add_option("--out", ev.out, "Output directory")->capture_default_str();

  TrainDekfArgs td;
  auto* d = app.add_subcommand("train-dekf", "Train the DeepEKF comparator on synthetic tracks");
  d->add_option("--seed", td.seed)->capture_default_str();
  d->add_option("--steps", td.steps)->capture_default_str();
  d->add_option("--lr", td.lr)->capture_default_str();
  d->add_option("--examples", td.examples)->capture_default_str();
  d->add_option("--cell", td.cell, "gru or lstm")->capture_default_str();
  d->add_option("--out", td.out, "Output directory")->capture_default_str();

  TrainReidArgs tr;
  auto* r = app.add_subcommand("train-reid", "Train the Siamese embedding on synthetic identities");
  r->add_option("--seed", tr.seed)->capture_default_str();
  r->add_option("--steps", tr.steps)->capture_default_str();
  r->add_option("--lr", tr.lr)->capture_default_str();
  r->add_flag("--no-attention", tr.no_attention, "Flatten + linear pooling");
  r->add_option("--out", tr.out, "Output directory")->capture_default_str();

  ReidEvalArgs re;
  auto* q = app.add_subcommand("reid-eval", "Rank-1 and mAP on a held-out gallery/query split");
  q->add_option("--checkpoint", re.checkpoint)->required()->check(CLI::ExistingFile);
  q->add_option("--seed", re.seed)->capture_default_str();
  q->add_option("--gallery-per-id", re.gallery_per_id)->capture_default_str();
  q->add_option("--queries-per-id", re.queries_per_id)->capture_default_str();
  q->add_option("--out", re.out, "Output directory")->capture_default_str();

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of model gradients");
  g->add_option("--model", gc.model, "dekf, dekf-lstm, siamese or siamese-attn")->capture_default_str();
  g->add_option("--samples", gc.samples)->capture_default_str();
  g->add_option("--eps", gc.eps)->capture_default_str();
  g->add_option("--tol", gc.tol)->capture_default_str();
  g->add_option("--seed", gc.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) run_synth(synth);
    if (*t) run_track(track);
    if (*e) run_eval(ev);
    if (*d) run_train_dekf(td);
    if (*r) run_train_reid(tr);
    if (*q) run_reid_eval(re);
    if (*g) return run_gradcheck(gc);
  } catch (const Error& err) {
    spdlog::error("{}", err.what());
    return 2;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return 2;
  }
  return 0;
}
