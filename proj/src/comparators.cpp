#include "airtrack/comparators.hpp"

#include <algorithm>

namespace airtrack {

namespace {

const Detection& latest(const BranchView& branch) {
  if (branch.observations.empty()) {
    throw Error(ErrorCode::kEmptySequence, "branch has no observations");
  }
  return *branch.observations.back();
}

}  // namespace

EkfComparator::EkfComparator(NoiseConfig noise, double gate_threshold, std::string name)
    : noise_(noise), gate_threshold_(gate_threshold), name_(std::move(name)) {}

RawScore EkfComparator::compare(const BranchView& branch, const Detection& det) const {
  if (branch.kinematic == nullptr) throw Error(ErrorCode::kInvalidArgument, "branch without filter state");
  KinematicState predicted = *branch.kinematic;
  if (det.frame_index > predicted.frame_index) {
    predicted = kinematic::kf_predict(predicted, static_cast<double>(det.frame_index - predicted.frame_index),
                                      noise_);
  }
  const KalmanUpdate inn = kinematic::kf_innovation(predicted, det.box, noise_);
  return {kinematic::kf_likelihood(inn.innovation, inn.innovation_cov),
          kinematic::likelihood_at_gate(inn.innovation_cov, gate_threshold_)};
}

DeepEkfComparator::DeepEkfComparator(std::shared_ptr<const deepekf::DeepEkfModel> model,
                                     NoiseConfig noise, double gate_threshold,
                                     deepekf::FrameGeometry geometry, std::string name)
    : model_(std::move(model)),
      fallback_(noise, gate_threshold, name),
      geometry_(geometry),
      latent_threshold_(deepekf::chi2_quantile(0.99, model_->config().latent)),
      name_(std::move(name)) {}

const deepekf::FeatureVector& DeepEkfComparator::feature(const Detection& det, double dt) const {
  const auto key = std::make_pair(det.detection_id, static_cast<std::int64_t>(dt));
  auto it = features_.find(key);
  if (it == features_.end()) {
    Detection prepared = det;
    prepared.chip = deepekf::prepare_chip(*model_, det.chip);
    it = features_.emplace(key, deepekf::featurize(*model_, prepared, dt, geometry_)).first;
  }
  return it->second;
}

namespace {

struct DekfContext : ComparatorContext {
  deepekf::EncoderOutput encoded;
};

}  // namespace

RawScore DeepEkfComparator::compare(const BranchView& branch, const Detection& det) const {
  if (branch.observations.size() < 2) return fallback_.compare(branch, det);
  const auto& obs = branch.observations;
  std::shared_ptr<const ComparatorContext> local;
  std::shared_ptr<const ComparatorContext>& ctx = branch.context ? *branch.context : local;
  const auto* cached = dynamic_cast<const DekfContext*>(ctx.get());
  if (cached == nullptr) {
    const std::size_t window = std::min<std::size_t>(obs.size(), model_->config().max_seq_len);
    std::vector<deepekf::FeatureVector> seq;
    for (std::size_t i = obs.size() - window; i < obs.size(); ++i) {
      const double dt = i == obs.size() - window
                            ? 0.0
                            : static_cast<double>(obs[i]->frame_index - obs[i - 1]->frame_index);
      seq.push_back(feature(*obs[i], dt));
    }
    auto fresh = std::make_shared<DekfContext>();
    fresh->encoded = deepekf::encode_sequence(*model_, seq);
    cached = fresh.get();
    ctx = std::move(fresh);
  }
  const auto horizon = static_cast<int>(det.frame_index - obs.back()->frame_index);
  if (horizon < 1) throw Error(ErrorCode::kFrameOrderViolation, "detection not after branch end");
  const deepekf::LatentPrediction pred =
      deepekf::decode_with_attention(*model_, cached->encoded, horizon).prediction;
  const Eigen::VectorXd meas =
      deepekf::encode_measurement(*model_, feature(det, horizon), cached->encoded);
  const double floor = model_->config().measurement_floor;
  return {deepekf::dekf_affinity(pred, meas, floor),
          deepekf::dekf_affinity_at(pred, floor, latent_threshold_)};
}

SsdComparator::SsdComparator(int size, std::string name) : size_(size), name_(std::move(name)) {
  if (size < 1) throw Error(ErrorCode::kConfigError, "ssd chip size must be positive");
}

const Chip& SsdComparator::resized(const Detection& det) const {
  auto it = cache_.find(det.detection_id);
  if (it == cache_.end()) it = cache_.emplace(det.detection_id, resize_chip(det.chip, size_, size_)).first;
  return it->second;
}

RawScore SsdComparator::compare(const BranchView& branch, const Detection& det) const {
  return {visual::ssd_distance(resized(latest(branch)), resized(det)), std::nullopt};
}

SiameseComparator::SiameseComparator(std::shared_ptr<const visual::SiameseModel> model, std::string name)
    : model_(std::move(model)), name_(std::move(name)) {}

const visual::Embedding& SiameseComparator::embedding(const Detection& det) const {
  auto it = cache_.find(det.detection_id);
  if (it == cache_.end()) {
    const Chip input = visual::prepare_chip(model_->config(), det.chip);
    it = cache_.emplace(det.detection_id, visual::embed(*model_, input)).first;
  }
  return it->second;
}

RawScore SiameseComparator::compare(const BranchView& branch, const Detection& det) const {
  return {visual::embedding_distance(embedding(latest(branch)), embedding(det)), std::nullopt};
}

}  // namespace airtrack
