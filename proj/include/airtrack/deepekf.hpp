// DeepEKF: a learned kinematic signature comparator.
//
// A tracklet is featurized frame by frame (chip embedding from a small conv
// encoder, normalized box, frame gap, platform metadata), encoded by a gated
// recurrent encoder, and decoded for `horizon` steps by a recurrent decoder
// with additive attention over the encoder states. Mean and log-variance heads
// map the final decoder state to a Gaussian in an n-dimensional latent space.
// Candidate measurements are encoded by one encoder step starting from the
// tracklet's final encoder state, then the mean head; the affinity is the
// Gaussian density of the latent residual.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "airtrack/autodiff.hpp"
#include "airtrack/core.hpp"
#include "airtrack/nn.hpp"

namespace airtrack::deepekf {

using ad::Matrix;

inline constexpr int kBoxDims = 4;
inline constexpr int kPlatformDims = 5;

struct DeepEkfConfig {
  int chip_size = 32;           // grayscale chip side
  int conv_channels = 8;        // both conv layers
  int chip_embedding = 16;
  int hidden = 32;
  int latent = 2;               // n, 1..8
  int max_seq_len = 8;
  nn::CellType cell = nn::CellType::kGru;
  double measurement_floor = 0.01;  // sigma_m^2, normalized latent units
  // Identity activations, ungated linear recurrences and uniform attention.
  // Finite-difference reference case; only the variance exp and the
  // recurrent weight powers are nonlinear in any single parameter.
  bool linear_probe = false;

  int feature_dim() const { return chip_embedding + kBoxDims + 1 + kPlatformDims; }
  void validate() const;
};

struct FrameGeometry {
  double width = 640.0;
  double height = 480.0;
};

struct FeatureVector {
  Eigen::VectorXd values;
};

struct EncoderOutput : ComparatorContext {
  Matrix hidden_states;        // hidden x T, column t is the state after step t
  Eigen::VectorXd final_hidden;
  Eigen::VectorXd final_cell;  // LSTM only; zeros for GRU

  Eigen::Index length() const { return hidden_states.cols(); }
};

struct LatentPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_variance;
  int horizon = 1;

  Eigen::VectorXd variance() const { return log_variance.array().exp().matrix(); }
};

struct Decoded {
  LatentPrediction prediction;
  std::vector<Eigen::RowVectorXd> attention;  // one distribution per decoder step
};

// One observation of a tracklet (or a candidate measurement) as network input.
struct Observation {
  const Detection* detection = nullptr;
  double dt = 0.0;  // frames since the previous observation
};

// One supervised example: a tracklet history, the true continuation at
// `horizon` frames after the last history entry, and its latent target.
struct TrainingExample {
  std::vector<Detection> history;
  Detection next;
  Eigen::VectorXd target;
  FrameGeometry geometry;
};

class DeepEkfModel {
 public:
  DeepEkfModel(const DeepEkfConfig& config, std::uint64_t seed);

  const DeepEkfConfig& config() const { return config_; }
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  // Tape-level graph pieces shared by inference and training.
  ad::Var chip_embedding(ad::Tape& tape, const Chip& chip) const;
  ad::Var feature(ad::Tape& tape, const Detection& det, double dt, const FrameGeometry& g) const;

  struct EncodedVars {
    std::vector<ad::Var> hidden;
    nn::RecurrentState final_state;
  };
  EncodedVars encode(ad::Tape& tape, std::span<const ad::Var> features) const;
  EncodedVars encode_from(ad::Tape& tape, const EncoderOutput& enc) const;

  struct DecodedVars {
    ad::Var mean;
    ad::Var log_variance;
    std::vector<ad::Var> attention;
  };
  DecodedVars decode(ad::Tape& tape, const EncodedVars& enc, int horizon) const;

  ad::Var measurement(ad::Tape& tape, ad::Var feature, const nn::RecurrentState& init) const;
  ad::Var mean_head(ad::Tape& tape, ad::Var state) const;

 private:
  ad::Activation act() const;

  DeepEkfConfig config_;
  nn::Conv2d conv1_;
  nn::Conv2d conv2_;
  nn::Linear chip_fc_;
  nn::RecurrentCell encoder_;
  nn::RecurrentCell decoder_;
  ad::Parameter attn_state_;   // W_a
  ad::Parameter attn_memory_;  // U_a
  ad::Parameter attn_bias_;
  ad::Parameter attn_score_;   // v
  nn::Linear mean_head_;
  nn::Linear logvar_head_;
};

// Throws DimensionMismatch unless the chip is chip_size x chip_size x 1.
FeatureVector featurize(const DeepEkfModel& model, const Detection& det, double dt,
                        const FrameGeometry& geometry);

// Converts any chip to the model's grayscale input size.
Chip prepare_chip(const DeepEkfModel& model, const Chip& chip);

// Throws EmptySequence for an empty list, InvalidArgument above max_seq_len.
EncoderOutput encode_sequence(const DeepEkfModel& model, std::span<const FeatureVector> features);

Decoded decode_with_attention(const DeepEkfModel& model, const EncoderOutput& enc, int horizon);

Eigen::VectorXd encode_measurement(const DeepEkfModel& model, const FeatureVector& feature,
                                   const EncoderOutput& init);

// Gaussian density of (meas_latent - pred.mean) under diag(var) + floor * I.
double dekf_affinity(const LatentPrediction& pred, const Eigen::VectorXd& meas_latent,
                     double measurement_floor);
double dekf_mahalanobis2(const LatentPrediction& pred, const Eigen::VectorXd& meas_latent,
                         double measurement_floor);
// Density at Mahalanobis^2 == threshold under the same covariance.
double dekf_affinity_at(const LatentPrediction& pred, double measurement_floor, double threshold);

// Chi-square quantile for `dof` degrees of freedom.
double chi2_quantile(double probability, int dof);

// Normalized future box center, zero-padded to the latent size.
Eigen::VectorXd position_target(const BoundingBox& box, const FrameGeometry& g, int latent);

// Mean Gaussian NLL of the targets under the predicted distribution and under
// the encoded true measurement, with covariance diag(exp(logvar)) + floor * I.
// Builds the graph on `tape` and returns the scalar loss var.
ad::Var training_loss(ad::Tape& tape, const DeepEkfModel& model,
                      std::span<const TrainingExample> batch);

double loss_value(const DeepEkfModel& model, std::span<const TrainingExample> batch);
double loss_and_gradients(DeepEkfModel& model, std::span<const TrainingExample> batch);

// One gradient step. Returns the pre-update loss; throws NonFiniteLoss without
// touching the parameters when the loss or its gradient is not finite.
double dekf_train_step(DeepEkfModel& model, std::span<const TrainingExample> batch,
                       const ad::GradientDescent& optimizer);

double gradient_check(DeepEkfModel& model, std::span<const TrainingExample> batch, double eps,
                      int samples, std::uint64_t seed);

}  // namespace airtrack::deepekf
