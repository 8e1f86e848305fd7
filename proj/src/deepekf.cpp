#include "airtrack/deepekf.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>

namespace airtrack::deepekf {

using ad::Parameter;
using ad::Tape;
using ad::Var;

void DeepEkfConfig::validate() const {
  if (chip_size < 8 || chip_size % 4 != 0) {
    throw Error(ErrorCode::kConfigError, "deepekf chip_size must be a multiple of 4, >= 8");
  }
  if (latent < 1 || latent > 8) throw Error(ErrorCode::kConfigError, "deepekf latent must be 1..8");
  if (hidden < 1 || chip_embedding < 1 || conv_channels < 1 || max_seq_len < 1) {
    throw Error(ErrorCode::kConfigError, "deepekf sizes must be positive");
  }
  if (!(measurement_floor > 0.0)) {
    throw Error(ErrorCode::kConfigError, "deepekf measurement_floor must be positive");
  }
}

DeepEkfModel::DeepEkfModel(const DeepEkfConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int s = config_.chip_size;
  conv1_ = nn::Conv2d("dekf.conv1", {1, s, s, 3, 2, 1}, config_.conv_channels, rng);
  conv2_ = nn::Conv2d("dekf.conv2", {config_.conv_channels, s / 2, s / 2, 3, 2, 1},
                      config_.conv_channels, rng);
  chip_fc_ = nn::Linear("dekf.chip_fc", config_.conv_channels * (s / 4) * (s / 4),
                        config_.chip_embedding, rng);
  encoder_ = nn::RecurrentCell("dekf.encoder", config_.cell, config_.feature_dim(), config_.hidden, rng);
  decoder_ = nn::RecurrentCell("dekf.decoder", config_.cell, config_.hidden, config_.hidden, rng);
  attn_state_ = Parameter("dekf.attn.w_state", nn::glorot(config_.hidden, config_.hidden, rng));
  attn_memory_ = Parameter("dekf.attn.w_memory", nn::glorot(config_.hidden, config_.hidden, rng));
  attn_bias_ = Parameter("dekf.attn.bias", Matrix::Zero(config_.hidden, 1));
  attn_score_ = Parameter("dekf.attn.v", nn::glorot(1, config_.hidden, rng));
  mean_head_ = nn::Linear("dekf.mean_head", config_.hidden, config_.latent, rng);
  logvar_head_ = nn::Linear("dekf.logvar_head", config_.hidden, config_.latent, rng);

  if (config_.linear_probe) {
    encoder_.linear = true;
    decoder_.linear = true;
  }
}

std::vector<Parameter*> DeepEkfModel::parameters() {
  std::vector<Parameter*> out;
  conv1_.collect(out);
  conv2_.collect(out);
  chip_fc_.collect(out);
  encoder_.collect(out);
  decoder_.collect(out);
  out.push_back(&attn_state_);
  out.push_back(&attn_memory_);
  out.push_back(&attn_bias_);
  out.push_back(&attn_score_);
  mean_head_.collect(out);
  logvar_head_.collect(out);
  return out;
}

std::vector<const Parameter*> DeepEkfModel::parameters() const {
  auto mutable_params = const_cast<DeepEkfModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

ad::Activation DeepEkfModel::act() const {
  return config_.linear_probe ? ad::Activation::kIdentity : ad::Activation::kTanh;
}

Var DeepEkfModel::chip_embedding(Tape& tape, const Chip& chip) const {
  const int s = config_.chip_size;
  if (chip.width() != s || chip.height() != s || chip.channels() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "deepekf chip must be " + std::to_string(s) + "x" +
                                                   std::to_string(s) + " grayscale");
  }
  Matrix input = Eigen::Map<const Eigen::RowVectorXd>(chip.pixels().data(), s * s);
  Var x = tape.constant(std::move(input));
  x = ad::activate(conv1_.forward(tape, x), act());
  x = ad::activate(conv2_.forward(tape, x), act());
  x = ad::reshape(x, x.value().size(), 1);
  return ad::activate(chip_fc_.forward(tape, x), act());
}

namespace {

Eigen::VectorXd side_features(const Detection& det, double dt, const FrameGeometry& g) {
  Eigen::VectorXd v(kBoxDims + 1 + kPlatformDims);
  const Point2 c = det.box.center();
  v << c.x / g.width, c.y / g.height, det.box.w / g.width, det.box.h / g.height, dt, 0, 0, 0, 0, 0;
  if (det.platform) {
    const PlatformMeta& p = *det.platform;
    v.tail(kPlatformDims) << p.longitude / 180.0, p.latitude / 90.0, p.camera_azimuth / 180.0,
        p.camera_elevation / 90.0, p.zoom;
  }
  return v;
}

}  // namespace

Var DeepEkfModel::feature(Tape& tape, const Detection& det, double dt, const FrameGeometry& g) const {
  const std::array<Var, 2> parts{chip_embedding(tape, det.chip),
                                 tape.constant(side_features(det, dt, g))};
  return ad::concat_rows(parts);
}

DeepEkfModel::EncodedVars DeepEkfModel::encode(Tape& tape, std::span<const Var> features) const {
  if (features.empty()) throw Error(ErrorCode::kEmptySequence, "encode requires >= 1 step");
  if (static_cast<int>(features.size()) > config_.max_seq_len) {
    throw Error(ErrorCode::kInvalidArgument, "sequence longer than max_seq_len");
  }
  EncodedVars out;
  nn::RecurrentState state = encoder_.zero_state(tape);
  for (const Var& f : features) {
    if (f.rows() != config_.feature_dim() || f.cols() != 1) {
      throw Error(ErrorCode::kDimensionMismatch, "feature vector has wrong dimension");
    }
    state = encoder_.step(tape, f, state);
    out.hidden.push_back(state.h);
  }
  out.final_state = state;
  return out;
}

DeepEkfModel::EncodedVars DeepEkfModel::encode_from(Tape& tape, const EncoderOutput& enc) const {
  if (enc.length() == 0) throw Error(ErrorCode::kEmptySequence, "empty encoder output");
  if (enc.hidden_states.rows() != config_.hidden) {
    throw Error(ErrorCode::kDimensionMismatch, "encoder output hidden size mismatch");
  }
  EncodedVars out;
  for (Eigen::Index t = 0; t < enc.length(); ++t) {
    out.hidden.push_back(tape.constant(enc.hidden_states.col(t)));
  }
  out.final_state.h = tape.constant(enc.final_hidden);
  out.final_state.c = tape.constant(enc.final_cell);
  return out;
}

DeepEkfModel::DecodedVars DeepEkfModel::decode(Tape& tape, const EncodedVars& enc, int horizon) const {
  if (horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
  const auto steps = static_cast<Eigen::Index>(enc.hidden.size());
  const Var memory = ad::concat_cols(enc.hidden);  // hidden x T
  const Var keys = ad::matmul(tape.param(attn_memory_), memory);
  DecodedVars out;
  nn::RecurrentState state = enc.final_state;
  for (int k = 0; k < horizon; ++k) {
    Var weights;
    if (config_.linear_probe) {
      weights = tape.constant(Matrix::Constant(1, steps, 1.0 / static_cast<double>(steps)));
    } else {
      const Var query = ad::add_bias(ad::matmul(tape.param(attn_state_), state.h),
                                     tape.param(attn_bias_));
      const Var energy = ad::tanh(ad::add_bias(keys, query));
      weights = ad::softmax_rows(ad::matmul(tape.param(attn_score_), energy));
    }
    out.attention.push_back(weights);
    const Var context = ad::matmul(memory, ad::transpose(weights));
    state = decoder_.step(tape, context, state);
  }
  out.mean = mean_head_.forward(tape, state.h);
  out.log_variance = logvar_head_.forward(tape, state.h);
  return out;
}

Var DeepEkfModel::mean_head(Tape& tape, Var state) const { return mean_head_.forward(tape, state); }

Var DeepEkfModel::measurement(Tape& tape, Var feature, const nn::RecurrentState& init) const {
  if (feature.rows() != config_.feature_dim() || feature.cols() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "feature vector has wrong dimension");
  }
  const nn::RecurrentState next = encoder_.step(tape, feature, init);
  return mean_head_.forward(tape, next.h);
}

Chip prepare_chip(const DeepEkfModel& model, const Chip& chip) {
  const int s = model.config().chip_size;
  return resize_chip(to_grayscale(chip), s, s);
}

FeatureVector featurize(const DeepEkfModel& model, const Detection& det, double dt,
                        const FrameGeometry& geometry) {
  Tape tape(false);
  return FeatureVector{model.feature(tape, det, dt, geometry).value().col(0)};
}

namespace {

std::vector<Var> feature_constants(Tape& tape, std::span<const FeatureVector> features) {
  std::vector<Var> vars;
  vars.reserve(features.size());
  for (const FeatureVector& f : features) vars.push_back(tape.constant(f.values));
  return vars;
}

}  // namespace

EncoderOutput encode_sequence(const DeepEkfModel& model, std::span<const FeatureVector> features) {
  Tape tape(false);
  const auto vars = feature_constants(tape, features);
  const auto enc = model.encode(tape, vars);
  EncoderOutput out;
  out.hidden_states.resize(model.config().hidden, static_cast<Eigen::Index>(enc.hidden.size()));
  for (std::size_t t = 0; t < enc.hidden.size(); ++t) {
    out.hidden_states.col(static_cast<Eigen::Index>(t)) = enc.hidden[t].value().col(0);
  }
  out.final_hidden = enc.final_state.h.value().col(0);
  out.final_cell = enc.final_state.c.value().col(0);
  return out;
}

Decoded decode_with_attention(const DeepEkfModel& model, const EncoderOutput& enc, int horizon) {
  Tape tape(false);
  const auto vars = model.encode_from(tape, enc);
  const auto dec = model.decode(tape, vars, horizon);
  Decoded out;
  out.prediction.mean = dec.mean.value().col(0);
  out.prediction.log_variance = dec.log_variance.value().col(0);
  out.prediction.horizon = horizon;
  for (const Var& w : dec.attention) out.attention.push_back(w.value().row(0));
  return out;
}

Eigen::VectorXd encode_measurement(const DeepEkfModel& model, const FeatureVector& feature,
                                   const EncoderOutput& init) {
  Tape tape(false);
  const auto vars = model.encode_from(tape, init);
  return model.measurement(tape, tape.constant(feature.values), vars.final_state).value().col(0);
}

double dekf_mahalanobis2(const LatentPrediction& pred, const Eigen::VectorXd& meas_latent,
                         double measurement_floor) {
  if (meas_latent.size() != pred.mean.size() || pred.log_variance.size() != pred.mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "latent dimension mismatch");
  }
  const Eigen::ArrayXd s = pred.log_variance.array().exp() + measurement_floor;
  const Eigen::ArrayXd r = (meas_latent - pred.mean).array();
  return (r.square() / s).sum();
}

namespace {

double log_norm_const(const LatentPrediction& pred, double measurement_floor) {
  const Eigen::ArrayXd s = pred.log_variance.array().exp() + measurement_floor;
  const double n = static_cast<double>(pred.mean.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * s.log().sum();
}

}  // namespace

double dekf_affinity(const LatentPrediction& pred, const Eigen::VectorXd& meas_latent,
                     double measurement_floor) {
  const double d2 = dekf_mahalanobis2(pred, meas_latent, measurement_floor);
  return std::exp(log_norm_const(pred, measurement_floor) - 0.5 * d2);
}

double dekf_affinity_at(const LatentPrediction& pred, double measurement_floor, double threshold) {
  return std::exp(log_norm_const(pred, measurement_floor) - 0.5 * threshold);
}

double chi2_quantile(double probability, int dof) {
  if (dof < 1 || !(probability > 0.0 && probability < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "chi2_quantile arguments out of range");
  }
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), probability);
}

Eigen::VectorXd position_target(const BoundingBox& box, const FrameGeometry& g, int latent) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(latent);
  const Point2 c = box.center();
  t(0) = c.x / g.width;
  if (latent > 1) t(1) = c.y / g.height;
  return t;
}

namespace {

Var gaussian_nll(Tape& tape, Var mean, Var log_variance, const Eigen::VectorXd& target,
                 double floor) {
  const Var variance = ad::affine(ad::exp(log_variance), 1.0, floor);
  const Var residual = ad::sub(tape.constant(target), mean);
  const Var quad = ad::mul(ad::square(residual), ad::reciprocal(variance));
  const double constant = 0.5 * static_cast<double>(target.size()) * std::log(2.0 * std::numbers::pi);
  return ad::affine(ad::sum(ad::add(ad::log(variance), quad)), 0.5, constant);
}

}  // namespace

Var training_loss(Tape& tape, const DeepEkfModel& model, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty training batch");
  const DeepEkfConfig& cfg = model.config();
  std::vector<Var> terms;
  for (const TrainingExample& ex : batch) {
    if (ex.history.empty()) throw Error(ErrorCode::kEmptySequence, "training example without history");
    if (ex.target.size() != cfg.latent) {
      throw Error(ErrorCode::kDimensionMismatch, "training target has wrong latent size");
    }
    std::vector<Var> features;
    for (std::size_t i = 0; i < ex.history.size(); ++i) {
      const double dt = i == 0 ? 0.0
                               : static_cast<double>(ex.history[i].frame_index -
                                                     ex.history[i - 1].frame_index);
      features.push_back(model.feature(tape, ex.history[i], dt, ex.geometry));
    }
    const auto horizon = static_cast<int>(ex.next.frame_index - ex.history.back().frame_index);
    const auto enc = model.encode(tape, features);
    const auto dec = model.decode(tape, enc, horizon);
    terms.push_back(gaussian_nll(tape, dec.mean, dec.log_variance, ex.target, cfg.measurement_floor));
    const Var next_feature = model.feature(tape, ex.next, horizon, ex.geometry);
    const Var meas = model.measurement(tape, next_feature, enc.final_state);
    terms.push_back(gaussian_nll(tape, meas, dec.log_variance, ex.target, cfg.measurement_floor));
  }
  return ad::mean(ad::concat_rows(terms));
}

double loss_value(const DeepEkfModel& model, std::span<const TrainingExample> batch) {
  Tape tape(false);
  return training_loss(tape, model, batch).scalar();
}

double loss_and_gradients(DeepEkfModel& model, std::span<const TrainingExample> batch) {
  auto params = model.parameters();
  ad::zero_grad(params);
  Tape tape(true);
  const Var loss = training_loss(tape, model, batch);
  tape.backward(loss);
  return loss.scalar();
}

double dekf_train_step(DeepEkfModel& model, std::span<const TrainingExample> batch,
                       const ad::GradientDescent& optimizer) {
  const double loss = loss_and_gradients(model, batch);
  auto params = model.parameters();
  bool finite = std::isfinite(loss);
  for (const Parameter* p : params) finite = finite && p->grad.allFinite();
  if (!finite) throw Error(ErrorCode::kNonFiniteLoss, "deepekf loss or gradient is not finite");
  optimizer.apply(params);
  return loss;
}

double gradient_check(DeepEkfModel& model, std::span<const TrainingExample> batch, double eps,
                      int samples, std::uint64_t seed) {
  auto params = model.parameters();
  Rng rng(seed);
  return ad::gradient_check(
      params, [&] { return loss_and_gradients(model, batch); },
      [&] { return loss_value(model, batch); }, samples, eps, rng);
}

}  // namespace airtrack::deepekf
