#pragma once

#include <Eigen/Dense>

#include "mtt/gaussian.hpp"
#include "mtt/params.hpp"
#include "mtt/rng.hpp"
#include "mtt/types.hpp"

namespace mtt {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/// Linear Gaussian target model: Gaussian birth density, random-walk intensity and
/// near-constant-velocity motion on each spatial axis.
class MotionModel {
 public:
  explicit MotionModel(const ModelParams& params);

  const Vec5& birth_mean() const { return birth_mean_; }
  const Mat5& birth_cov() const { return birth_cov_; }
  const Mat5& transition() const { return transition_; }
  const Mat5& transition_cov() const { return transition_cov_; }
  /// Position-velocity noise covariance for axis 0 (row) or 1 (column).
  Eigen::Matrix2d axis_noise(int axis) const;
  Eigen::Matrix2d axis_transition() const;
  double dt() const { return dt_; }

  double log_initial(const TargetState& x) const;
  double log_transition(const TargetState& next, const TargetState& prev) const;
  TargetState sample_initial(Rng& rng) const;
  TargetState sample_transition(const TargetState& prev, Rng& rng) const;

  /// Normalised density proportional to mu(x) f(next | x).
  Gaussian backward_conditional(const TargetState& next) const;

 private:
  double dt_;
  Vec5 birth_mean_;
  Mat5 birth_cov_;
  Mat5 transition_;
  Mat5 transition_cov_;
  Gaussian birth_;
  Eigen::Matrix<double, 5, 5> transition_prec_;
  double transition_log_norm_;
};

}  // namespace mtt
