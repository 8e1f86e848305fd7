#include "airtrack/kinematic.hpp"

#include <cmath>
#include <numbers>

namespace airtrack::kinematic {

namespace {

Eigen::Matrix2d checked_inverse(const Eigen::Matrix2d& s) {
  const double det = s.determinant();
  if (!std::isfinite(det) || det <= 0.0 || !s.allFinite()) {
    throw Error(ErrorCode::kSingularInnovation, "innovation covariance is not invertible");
  }
  return s.inverse();
}

Eigen::Matrix2d measurement_noise(const NoiseConfig& cfg) {
  return Eigen::Matrix2d::Identity() * (cfg.measurement_std * cfg.measurement_std);
}

}  // namespace

Eigen::Matrix4d transition_jacobian(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

Eigen::Matrix<double, 2, 4> measurement_jacobian() {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  return h;
}

// Discrete white-noise acceleration per axis with intensity process_std_vel^2,
// plus an independent position random walk of process_std_pos^2 per frame.
Eigen::Matrix4d process_noise(double dt, const NoiseConfig& cfg) {
  const double qv = cfg.process_std_vel * cfg.process_std_vel;
  const double qp = cfg.process_std_pos * cfg.process_std_pos;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  for (int axis = 0; axis < 2; ++axis) {
    q(axis, axis) = qv * dt * dt * dt / 3.0 + qp * dt;
    q(axis, axis + 2) = qv * dt * dt / 2.0;
    q(axis + 2, axis) = qv * dt * dt / 2.0;
    q(axis + 2, axis + 2) = qv * dt;
  }
  return q;
}

KinematicState kf_init(const Detection& detection, const NoiseConfig& cfg) {
  KinematicState state;
  const Point2 c = detection.box.center();
  state.mean << c.x, c.y, 0.0, 0.0;
  const double pos_var = cfg.measurement_std * cfg.measurement_std;
  const double vel_var = cfg.process_std_vel * cfg.process_std_vel * kVelocityInflation;
  state.covariance = Eigen::Vector4d(pos_var, pos_var, vel_var, vel_var).asDiagonal();
  state.frame_index = detection.frame_index;
  return state;
}

KinematicState kf_predict(const KinematicState& state, double dt, const NoiseConfig& cfg) {
  if (dt < 1.0) throw Error(ErrorCode::kInvalidArgument, "predict requires dt >= 1");
  const Eigen::Matrix4d f = transition_jacobian(dt);
  KinematicState out;
  out.mean = f * state.mean;
  out.covariance = f * state.covariance * f.transpose() + process_noise(dt, cfg);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.frame_index = state.frame_index + static_cast<std::int64_t>(std::llround(dt));
  return out;
}

KalmanUpdate kf_innovation(const KinematicState& predicted, const BoundingBox& measurement,
                           const NoiseConfig& cfg) {
  const auto h = measurement_jacobian();
  const Point2 z = measurement.center();
  KalmanUpdate out;
  out.state = predicted;
  out.innovation = Eigen::Vector2d(z.x, z.y) - h * predicted.mean;
  out.innovation_cov = h * predicted.covariance * h.transpose() + measurement_noise(cfg);
  return out;
}

KalmanUpdate kf_update(const KinematicState& predicted, const BoundingBox& measurement,
                       const NoiseConfig& cfg) {
  KalmanUpdate out = kf_innovation(predicted, measurement, cfg);
  const auto h = measurement_jacobian();
  const Eigen::Matrix2d s_inv = checked_inverse(out.innovation_cov);
  const Eigen::Matrix<double, 4, 2> gain = predicted.covariance * h.transpose() * s_inv;
  out.state.mean = predicted.mean + gain * out.innovation;
  Eigen::Matrix4d cov = (Eigen::Matrix4d::Identity() - gain * h) * predicted.covariance;
  out.state.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

Eigen::Matrix4d joseph_covariance(const Eigen::Matrix4d& prior, const Eigen::Matrix2d& r) {
  const auto h = measurement_jacobian();
  const Eigen::Matrix2d s = h * prior * h.transpose() + r;
  const Eigen::Matrix<double, 4, 2> gain = prior * h.transpose() * checked_inverse(s);
  const Eigen::Matrix4d a = Eigen::Matrix4d::Identity() - gain * h;
  return a * prior * a.transpose() + gain * r * gain.transpose();
}

double mahalanobis2(const Eigen::Vector2d& innovation, const Eigen::Matrix2d& s) {
  return innovation.dot(checked_inverse(s) * innovation);
}

double kf_likelihood(const Eigen::Vector2d& innovation, const Eigen::Matrix2d& s) {
  const double d2 = mahalanobis2(innovation, s);
  return std::exp(-0.5 * d2) / (2.0 * std::numbers::pi * std::sqrt(s.determinant()));
}

double likelihood_at_gate(const Eigen::Matrix2d& s, double threshold) {
  checked_inverse(s);
  return std::exp(-0.5 * threshold) / (2.0 * std::numbers::pi * std::sqrt(s.determinant()));
}

bool kf_gate(const Eigen::Vector2d& innovation, const Eigen::Matrix2d& s, double threshold) {
  return mahalanobis2(innovation, s) <= threshold;
}

double chi2_2dof_quantile(double probability) {
  if (!(probability > 0.0 && probability < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile probability must be in (0,1)");
  }
  return -2.0 * std::log1p(-probability);
}

double default_gate_threshold() { return chi2_2dof_quantile(0.99); }

bool is_positive_definite(const Eigen::Matrix4d& m) {
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  Eigen::LLT<Eigen::Matrix4d> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace airtrack::kinematic
