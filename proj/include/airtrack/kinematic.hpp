// Constant-velocity Kalman filter in pixel space.
//
// The filter is written in EKF form: the transition and measurement models go
// through Jacobian hooks, which are exact (and constant) for this linear model.
#pragma once

#include <Eigen/Dense>

#include "airtrack/core.hpp"

namespace airtrack {

struct NoiseConfig {
  double process_std_pos = 1.0;   // px
  double process_std_vel = 0.5;   // px / frame
  double measurement_std = 2.0;   // px

  bool valid() const {
    return process_std_pos > 0.0 && process_std_vel > 0.0 && measurement_std > 0.0;
  }
};

// mean = (x, y, vx, vy) of the box center.
struct KinematicState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  std::int64_t frame_index = 0;
};

struct KalmanUpdate {
  KinematicState state;
  Eigen::Vector2d innovation;
  Eigen::Matrix2d innovation_cov;
};

namespace kinematic {

// Initial velocity variance is the process velocity variance times this.
inline constexpr double kVelocityInflation = 10.0;

Eigen::Matrix4d transition_jacobian(double dt);
Eigen::Matrix<double, 2, 4> measurement_jacobian();
Eigen::Matrix4d process_noise(double dt, const NoiseConfig& cfg);

KinematicState kf_init(const Detection& detection, const NoiseConfig& cfg);

// dt is the frame gap, >= 1.
KinematicState kf_predict(const KinematicState& state, double dt, const NoiseConfig& cfg);

// Innovation and its covariance for a predicted state, without updating.
KalmanUpdate kf_innovation(const KinematicState& predicted, const BoundingBox& measurement,
                           const NoiseConfig& cfg);

// Throws SingularInnovation if S cannot be inverted.
KalmanUpdate kf_update(const KinematicState& predicted, const BoundingBox& measurement,
                       const NoiseConfig& cfg);

// Posterior covariance via the Joseph stabilized form; used for cross-checks.
Eigen::Matrix4d joseph_covariance(const Eigen::Matrix4d& prior, const Eigen::Matrix2d& r);

double mahalanobis2(const Eigen::Vector2d& innovation, const Eigen::Matrix2d& s);

// Bivariate normal density of the innovation.
double kf_likelihood(const Eigen::Vector2d& innovation, const Eigen::Matrix2d& s);

// Density at Mahalanobis radius^2 == threshold under covariance s.
double likelihood_at_gate(const Eigen::Matrix2d& s, double threshold);

bool kf_gate(const Eigen::Vector2d& innovation, const Eigen::Matrix2d& s, double threshold);

// Chi-square quantile with two degrees of freedom; -2 ln(1 - p).
double chi2_2dof_quantile(double probability);
double default_gate_threshold();

bool is_positive_definite(const Eigen::Matrix4d& m);

}  // namespace kinematic
}  // namespace airtrack
