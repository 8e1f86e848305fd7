#include "airtrack/visual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace airtrack::visual {

using ad::Parameter;
using ad::Tape;
using ad::Var;
using ad::Matrix;

double ssd_distance(const Chip& a, const Chip& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    throw Error(ErrorCode::kDimensionMismatch, "ssd_distance: chip sizes differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    total += d * d;
  }
  return total;
}

void SiameseConfig::validate() const {
  if (chip_size < 8 || chip_size % 8 != 0) {
    throw Error(ErrorCode::kConfigError, "siamese chip_size must be a positive multiple of 8");
  }
  if (channels1 < 1 || channels2 < 1 || channels3 < 1 || neck_dim < 1 || heads < 1 || head_dim < 1) {
    throw Error(ErrorCode::kConfigError, "siamese sizes must be positive");
  }
}

SiameseModel::SiameseModel(const SiameseConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int s = config_.chip_size;
  conv1_ = nn::Conv2d("reid.conv1", {3, s, s, 3, 2, 1}, config_.channels1, rng);
  conv2_ = nn::Conv2d("reid.conv2", {config_.channels1, s / 2, s / 2, 3, 2, 1}, config_.channels2, rng);
  conv3_ = nn::Conv2d("reid.conv3", {config_.channels2, s / 4, s / 4, 3, 2, 1}, config_.channels3, rng);
  neck_ = nn::Linear("reid.neck", config_.channels3, config_.neck_dim, rng);
  if (config_.attention_enabled) {
    gate_ = nn::Linear("reid.decoder.gate", config_.neck_dim, 1, rng);
    head_logits_ = nn::Linear("reid.head.logits", config_.neck_dim, config_.heads, rng);
    for (int h = 0; h < config_.heads; ++h) {
      head_proj_.emplace_back("reid.head.proj" + std::to_string(h), config_.neck_dim,
                              config_.head_dim, rng);
    }
  } else {
    const int cells = config_.grid_size() * config_.grid_size();
    flat_proj_ = nn::Linear("reid.flat", config_.neck_dim * cells, config_.embedding_dim(), rng);
  }
}

std::vector<Parameter*> SiameseModel::parameters() {
  std::vector<Parameter*> out;
  conv1_.collect(out);
  conv2_.collect(out);
  conv3_.collect(out);
  neck_.collect(out);
  if (config_.attention_enabled) {
    gate_.collect(out);
    head_logits_.collect(out);
    for (auto& p : head_proj_) p.collect(out);
  } else {
    flat_proj_.collect(out);
  }
  return out;
}

std::vector<const Parameter*> SiameseModel::parameters() const {
  auto mutable_params = const_cast<SiameseModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

void SiameseModel::zero_attention_logits() {
  if (!config_.attention_enabled) throw Error(ErrorCode::kAttentionDisabled, "no attention head");
  head_logits_.weight.value.setZero();
  head_logits_.bias.value.setZero();
}

Var SiameseModel::pool(Tape& tape, Var grid, Var weights) const {
  const Var pooled_t = ad::transpose(ad::matmul(grid, ad::transpose(weights)));  // H x D
  std::vector<Var> parts;
  for (int h = 0; h < config_.heads; ++h) {
    parts.push_back(head_proj_[h].forward(tape, ad::transpose(ad::slice_rows(pooled_t, h, 1))));
  }
  return ad::concat_rows(parts);
}

SiameseModel::Forward SiameseModel::forward(Tape& tape, const Chip& chip) const {
  const int s = config_.chip_size;
  if (chip.width() != s || chip.height() != s || chip.channels() != 3) {
    throw Error(ErrorCode::kDimensionMismatch,
                "siamese input must be " + std::to_string(s) + "x" + std::to_string(s) + " RGB");
  }
  Matrix input(3, s * s);
  for (int i = 0; i < s * s; ++i) {
    for (int c = 0; c < 3; ++c) input(c, i) = chip.pixels()[static_cast<std::size_t>(i) * 3 + c] - 0.5;
  }
  Var x = tape.constant(std::move(input));
  x = ad::tanh(conv1_.forward(tape, x));
  x = ad::tanh(conv2_.forward(tape, x));
  x = ad::tanh(conv3_.forward(tape, x));
  const Var features = ad::tanh(neck_.forward(tape, x));  // D x cells

  Forward out;
  if (!config_.attention_enabled) {
    out.grid = features;
    out.embedding = flat_proj_.forward(tape, ad::reshape(features, features.value().size(), 1));
    return out;
  }
  const Var gate = ad::sigmoid(gate_.forward(tape, features));  // 1 x cells
  out.grid = ad::mul_row_broadcast(features, gate);
  out.weights = ad::softmax_rows(head_logits_.forward(tape, out.grid));
  out.embedding = pool(tape, out.grid, out.weights);
  return out;
}

Chip prepare_chip(const SiameseConfig& config, const Chip& chip) {
  Chip rgb = chip;
  if (chip.channels() == 1) {
    std::vector<double> px;
    px.reserve(chip.pixels().size() * 3);
    for (double v : chip.pixels()) px.insert(px.end(), {v, v, v});
    rgb = Chip(chip.width(), chip.height(), 3, std::move(px));
  }
  return resize_chip(rgb, config.chip_size, config.chip_size);
}

Embedding embed(const SiameseModel& model, const Chip& chip) {
  Tape tape(false);
  const auto fwd = model.forward(tape, chip);
  return Embedding{fwd.embedding.value().col(0), model.config().heads};
}

double embedding_distance(const Embedding& a, const Embedding& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding lengths differ");
  }
  return (a.values - b.values).norm();
}

AttentionMaps attention_maps(const SiameseModel& model, const Chip& chip) {
  if (!model.config().attention_enabled) {
    throw Error(ErrorCode::kAttentionDisabled, "model was built without attention");
  }
  Tape tape(false);
  const auto fwd = model.forward(tape, chip);
  const int g = model.config().grid_size();
  AttentionMaps out;
  out.grid_height = g;
  out.grid_width = g;
  const Matrix& w = fwd.weights.value();
  for (Eigen::Index h = 0; h < w.rows(); ++h) {
    Eigen::MatrixXd m(g, g);
    for (int r = 0; r < g; ++r) {
      for (int c = 0; c < g; ++c) m(r, c) = w(h, r * g + c);
    }
    out.maps.push_back(std::move(m));
  }
  return out;
}

Eigen::MatrixXd feature_grid(const SiameseModel& model, const Chip& chip) {
  Tape tape(false);
  return model.forward(tape, chip).grid.value();
}

Embedding pool_with_maps(const SiameseModel& model, const Eigen::MatrixXd& grid,
                         const AttentionMaps& maps) {
  if (!model.config().attention_enabled) {
    throw Error(ErrorCode::kAttentionDisabled, "model was built without attention");
  }
  const auto heads = static_cast<Eigen::Index>(maps.maps.size());
  const Eigen::Index cells = static_cast<Eigen::Index>(maps.grid_height) * maps.grid_width;
  if (heads != model.config().heads || cells != grid.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "attention maps do not match the feature grid");
  }
  Matrix w(heads, cells);
  for (Eigen::Index h = 0; h < heads; ++h) {
    for (int r = 0; r < maps.grid_height; ++r) {
      for (int c = 0; c < maps.grid_width; ++c) w(h, r * maps.grid_width + c) = maps.maps[h](r, c);
    }
  }
  Tape tape(false);
  const Var e = model.pool(tape, tape.constant(grid), tape.constant(std::move(w)));
  return Embedding{e.value().col(0), model.config().heads};
}

Embedding mean_pooled_embedding(const SiameseModel& model, const Chip& chip) {
  const Eigen::MatrixXd grid = feature_grid(model, chip);
  const int g = model.config().grid_size();
  AttentionMaps uniform;
  uniform.grid_height = g;
  uniform.grid_width = g;
  uniform.maps.assign(model.config().heads, Eigen::MatrixXd::Constant(g, g, 1.0 / (g * g)));
  return pool_with_maps(model, grid, uniform);
}

Var contrastive_loss(Tape& tape, const SiameseModel& model, std::span<const ChipPair> pairs,
                     double margin) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "empty pair batch");
  std::vector<Var> terms;
  for (const ChipPair& p : pairs) {
    const Var ea = model.forward(tape, p.a).embedding;
    const Var eb = model.forward(tape, p.b).embedding;
    const Var d2 = ad::sum(ad::square(ad::sub(ea, eb)));
    if (p.same) {
      terms.push_back(d2);
    } else {
      // tiny offset keeps sqrt differentiable at d = 0
      const Var d = ad::sqrt(ad::affine(d2, 1.0, 1e-12));
      terms.push_back(ad::square(ad::relu(ad::affine(d, -1.0, margin))));
    }
  }
  return ad::mean(ad::concat_rows(terms));
}

double contrastive_loss_value(const SiameseModel& model, std::span<const ChipPair> pairs,
                              double margin) {
  Tape tape(false);
  return contrastive_loss(tape, model, pairs, margin).scalar();
}

namespace {

double loss_and_gradients(SiameseModel& model, std::span<const ChipPair> pairs, double margin) {
  auto params = model.parameters();
  ad::zero_grad(params);
  Tape tape(true);
  const Var loss = contrastive_loss(tape, model, pairs, margin);
  tape.backward(loss);
  return loss.scalar();
}

}  // namespace

double contrastive_train_step(SiameseModel& model, std::span<const ChipPair> pairs, double margin,
                              const ad::GradientDescent& optimizer) {
  const bool has_pos = std::any_of(pairs.begin(), pairs.end(), [](const ChipPair& p) { return p.same; });
  const bool has_neg = std::any_of(pairs.begin(), pairs.end(), [](const ChipPair& p) { return !p.same; });
  if (!has_pos || !has_neg) {
    throw Error(ErrorCode::kInvalidArgument, "batch needs a positive and a negative pair");
  }
  const double loss = loss_and_gradients(model, pairs, margin);
  auto params = model.parameters();
  bool finite = std::isfinite(loss);
  for (const Parameter* p : params) finite = finite && p->grad.allFinite();
  if (!finite) throw Error(ErrorCode::kNonFiniteLoss, "contrastive loss or gradient is not finite");
  optimizer.apply(params);
  return loss;
}

double gradient_check(SiameseModel& model, std::span<const ChipPair> pairs, double margin,
                      double eps, int samples, std::uint64_t seed) {
  auto params = model.parameters();
  Rng rng(seed);
  return ad::gradient_check(
      params, [&] { return loss_and_gradients(model, pairs, margin); },
      [&] { return contrastive_loss_value(model, pairs, margin); }, samples, eps, rng);
}

ReidResult evaluate_reid(const Eigen::MatrixXd& distances, std::span<const int> query_ids,
                         std::span<const int> gallery_ids) {
  if (distances.rows() != static_cast<Eigen::Index>(query_ids.size()) ||
      distances.cols() != static_cast<Eigen::Index>(gallery_ids.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "distance matrix does not match id lists");
  }
  ReidResult out;
  if (query_ids.empty()) return out;
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    if (std::find(gallery_ids.begin(), gallery_ids.end(), query_ids[q]) == gallery_ids.end()) {
      throw Error(ErrorCode::kIdentityMissing,
                  "query identity " + std::to_string(query_ids[q]) + " not in gallery");
    }
    std::vector<std::size_t> order(gallery_ids.size());
    std::iota(order.begin(), order.end(), 0);
    const auto row = static_cast<Eigen::Index>(q);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return distances(row, static_cast<Eigen::Index>(a)) < distances(row, static_cast<Eigen::Index>(b));
    });
    if (gallery_ids[order.front()] == query_ids[q]) out.rank1 += 1.0;
    double hits = 0.0, precision_sum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (gallery_ids[order[k]] == query_ids[q]) {
        hits += 1.0;
        precision_sum += hits / static_cast<double>(k + 1);
      }
    }
    out.mean_ap += precision_sum / hits;
  }
  const auto n = static_cast<double>(query_ids.size());
  out.rank1 /= n;
  out.mean_ap /= n;
  return out;
}

ReidResult evaluate_reid(const SiameseModel& model, std::span<const LabeledChip> queries,
                         std::span<const LabeledChip> gallery) {
  std::vector<Embedding> ge;
  std::vector<int> gids, qids;
  for (const auto& g : gallery) {
    ge.push_back(embed(model, g.chip));
    gids.push_back(g.identity);
  }
  Eigen::MatrixXd d(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(gallery.size()));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    qids.push_back(queries[q].identity);
    const Embedding qe = embed(model, queries[q].chip);
    for (std::size_t g = 0; g < ge.size(); ++g) {
      d(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(g)) = embedding_distance(qe, ge[g]);
    }
  }
  return evaluate_reid(d, qids, gids);
}

}  // namespace airtrack::visual
