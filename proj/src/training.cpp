#include "airtrack/training.hpp"

#include <cmath>
#include <numbers>

#include "airtrack/scenario.hpp"

namespace airtrack::training {

namespace {

Detection make_detection(const deepekf::DeepEkfModel& model, std::int64_t frame, Point2 center, double w,
                         double h, const Chip& chip, DetectionId id) {
  Detection d;
  d.frame_index = frame;
  d.detection_id = id;
  d.box = BoundingBox{center.x - w / 2.0, center.y - h / 2.0, w, h};
  d.label = "person";
  d.chip = deepekf::prepare_chip(model, chip);
  d.platform = PlatformMeta{-77.0365, 38.8977, 45.0, -30.0, 1.0};
  return d;
}

}  // namespace

std::vector<deepekf::TrainingExample> make_dekf_examples(const deepekf::DeepEkfModel& model, int count,
                                                         const DekfDataSpec& spec, Rng& rng) {
  std::vector<deepekf::TrainingExample> out;
  const int max_len = model.config().max_seq_len;
  const auto& g = spec.geometry;
  DetectionId next_id = 1;
  for (int e = 0; e < count; ++e) {
    const int length = static_cast<int>(rng.uniform_int(2, max_len));
    const int horizon = static_cast<int>(rng.uniform_int(1, spec.max_horizon));
    const Point2 v{rng.uniform(-spec.max_speed, spec.max_speed), rng.uniform(-spec.max_speed, spec.max_speed)};
    const double span = (length + horizon) * spec.max_speed;
    const Point2 p0{rng.uniform(span + 20.0, g.width - span - 20.0),
                    rng.uniform(span + 20.0, g.height - span - 20.0)};
    const double w = rng.uniform(10.0, 30.0), h = rng.uniform(18.0, 40.0);
    const int identity = static_cast<int>(rng.uniform_int(0, scenario::kIdentityCount - 1));
    const auto jitter = scenario::random_jitter(rng);

    deepekf::TrainingExample ex;
    ex.geometry = g;
    auto observe = [&](std::int64_t f) {
      const Point2 c{p0.x + v.x * f + rng.normal(0.0, spec.position_noise),
                     p0.y + v.y * f + rng.normal(0.0, spec.position_noise)};
      const Chip chip = scenario::render_identity(identity, scenario::random_nuisance(rng, jitter));
      return make_detection(model, f, c, w, h, chip, next_id++);
    };
    for (int f = 0; f < length; ++f) ex.history.push_back(observe(f));
    const std::int64_t target_frame = length - 1 + horizon;
    ex.next = observe(target_frame);
    const BoundingBox truth{p0.x + v.x * target_frame - w / 2.0, p0.y + v.y * target_frame - h / 2.0, w, h};
    ex.target = deepekf::position_target(truth, g, model.config().latent);
    out.push_back(std::move(ex));
  }
  return out;
}

DekfTrainReport train_dekf(deepekf::DeepEkfModel& model,
                           const std::vector<deepekf::TrainingExample>& examples, int steps,
                           const ad::GradientDescent& optimizer) {
  DekfTrainReport report;
  for (int s = 0; s < steps; ++s) {
    report.losses.push_back(deepekf::dekf_train_step(model, examples, optimizer));
  }
  report.initial_loss = report.losses.empty() ? deepekf::loss_value(model, examples) : report.losses.front();
  report.final_loss = deepekf::loss_value(model, examples);
  return report;
}

double dekf_ranking_accuracy(const deepekf::DeepEkfModel& model,
                             const std::vector<deepekf::TrainingExample>& examples, int decoys,
                             Rng& rng) {
  if (examples.empty()) return 0.0;
  const double floor = model.config().measurement_floor;
  int wins = 0;
  for (const auto& ex : examples) {
    std::vector<deepekf::FeatureVector> seq;
    for (std::size_t i = 0; i < ex.history.size(); ++i) {
      const double dt = i == 0 ? 0.0 : static_cast<double>(ex.history[i].frame_index - ex.history[i - 1].frame_index);
      seq.push_back(deepekf::featurize(model, ex.history[i], dt, ex.geometry));
    }
    const auto enc = deepekf::encode_sequence(model, seq);
    const auto horizon = static_cast<int>(ex.next.frame_index - ex.history.back().frame_index);
    const auto pred = deepekf::decode_with_attention(model, enc, horizon).prediction;
    auto affinity = [&](const Detection& d) {
      const auto f = deepekf::featurize(model, d, horizon, ex.geometry);
      return deepekf::dekf_affinity(pred, deepekf::encode_measurement(model, f, enc), floor);
    };
    const double truth = affinity(ex.next);
    const Eigen::VectorXd sd = (pred.variance().array() + floor).sqrt();
    const double sx = sd(0) * ex.geometry.width;
    const double sy = (sd.size() > 1 ? sd(1) : sd(0)) * ex.geometry.height;
    bool best = true;
    for (int k = 0; k < decoys; ++k) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double radius = rng.uniform(5.0, 7.0);
      Detection decoy = ex.next;
      decoy.box.x += radius * sx * std::cos(angle);
      decoy.box.y += radius * sy * std::sin(angle);
      best = best && truth > affinity(decoy);
    }
    if (best) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(examples.size());
}

namespace {

Chip render(const visual::SiameseConfig& cfg, int identity, Rng& rng) {
  const auto jitter = scenario::random_jitter(rng);
  return visual::prepare_chip(cfg, scenario::render_identity(identity, scenario::random_nuisance(rng, jitter),
                                                             cfg.chip_size));
}

}  // namespace

std::vector<visual::ChipPair> make_pairs(const visual::SiameseConfig& cfg, int positives, int negatives,
                                         Rng& rng) {
  std::vector<visual::ChipPair> out;
  const int last = scenario::kIdentityCount - 1;
  for (int i = 0; i < positives; ++i) {
    const int id = static_cast<int>(rng.uniform_int(0, last));
    Chip a = render(cfg, id, rng);
    Chip b = render(cfg, id, rng);
    out.push_back({std::move(a), std::move(b), true});
  }
  for (int i = 0; i < negatives; ++i) {
    int a = 0, b = 1;
    if (i % 3 != 0) {
      a = static_cast<int>(rng.uniform_int(0, last));
      b = static_cast<int>(rng.uniform_int(0, last - 1));
      if (b >= a) ++b;
    } else if (rng.bernoulli(0.5)) {
      std::swap(a, b);
    }
    Chip ca = render(cfg, a, rng);
    Chip cb = render(cfg, b, rng);
    out.push_back({std::move(ca), std::move(cb), false});
  }
  return out;
}

ReidSplit make_reid_split(const visual::SiameseConfig& cfg, int gallery_per_id, int queries_per_id,
                          Rng& rng) {
  ReidSplit out;
  for (int id = 0; id < scenario::kIdentityCount; ++id) {
    for (int k = 0; k < gallery_per_id; ++k) out.gallery.push_back({render(cfg, id, rng), id});
    for (int k = 0; k < queries_per_id; ++k) out.queries.push_back({render(cfg, id, rng), id});
  }
  return out;
}

ReidTrainReport train_reid(visual::SiameseModel& model, int steps, int positives, int negatives,
                           double margin, const ad::GradientDescent& optimizer, Rng& rng) {
  ReidTrainReport report;
  const auto probe = make_pairs(model.config(), 3 * positives, 3 * negatives, rng);
  report.initial_loss = visual::contrastive_loss_value(model, probe, margin);
  for (int s = 0; s < steps; ++s) {
    const auto batch = make_pairs(model.config(), positives, negatives, rng);
    report.losses.push_back(visual::contrastive_train_step(model, batch, margin, optimizer));
  }
  report.final_loss = visual::contrastive_loss_value(model, probe, margin);
  return report;
}

}  // namespace airtrack::training
