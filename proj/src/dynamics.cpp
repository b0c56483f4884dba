#include "mtt/dynamics.hpp"

#include <cmath>

namespace mtt {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

MotionModel::MotionModel(const ModelParams& params) : dt_(params.dt) {
  const auto& d = params.dyn;
  birth_mean_ << d.mu_bi, d.mu_bx, d.mu_by, 0.0, 0.0;
  birth_cov_.setZero();
  birth_cov_.diagonal() << d.var_bi, d.var_bp, d.var_bp, d.var_bv, d.var_bv;

  transition_.setIdentity();
  transition_(1, 3) = dt_;
  transition_(2, 4) = dt_;

  transition_cov_.setZero();
  transition_cov_(0, 0) = d.var_i;
  const double q11 = dt_ * dt_ * dt_ / 3.0;
  const double q12 = dt_ * dt_ / 2.0;
  const double q22 = dt_;
  transition_cov_(1, 1) = d.var_x * q11;
  transition_cov_(1, 3) = transition_cov_(3, 1) = d.var_x * q12;
  transition_cov_(3, 3) = d.var_x * q22;
  transition_cov_(2, 2) = d.var_y * q11;
  transition_cov_(2, 4) = transition_cov_(4, 2) = d.var_y * q12;
  transition_cov_(4, 4) = d.var_y * q22;

  birth_ = Gaussian::from_covariance(birth_mean_, birth_cov_);
  Eigen::LLT<Mat5> llt(transition_cov_);
  transition_prec_ = llt.solve(Mat5::Identity());
  Mat5 l = llt.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < 5; ++i) log_det += 2.0 * std::log(l(i, i));
  transition_log_norm_ = -0.5 * (5.0 * kLog2Pi + log_det);
}

Eigen::Matrix2d MotionModel::axis_noise(int axis) const {
  const int p = 1 + axis;
  const int v = 3 + axis;
  Eigen::Matrix2d q;
  q << transition_cov_(p, p), transition_cov_(p, v), transition_cov_(v, p), transition_cov_(v, v);
  return q;
}

Eigen::Matrix2d MotionModel::axis_transition() const {
  Eigen::Matrix2d f;
  f << 1.0, dt_, 0.0, 1.0;
  return f;
}

double MotionModel::log_initial(const TargetState& x) const {
  return birth_.log_density(x.to_vector());
}

double MotionModel::log_transition(const TargetState& next, const TargetState& prev) const {
  Vec5 d = next.to_vector() - transition_ * prev.to_vector();
  return transition_log_norm_ - 0.5 * d.dot(transition_prec_ * d);
}

TargetState MotionModel::sample_initial(Rng& rng) const {
  return TargetState::from_vector(birth_.sample(rng));
}

TargetState MotionModel::sample_transition(const TargetState& prev, Rng& rng) const {
  Eigen::LLT<Mat5> llt(transition_cov_);
  Vec5 z;
  for (int i = 0; i < 5; ++i) z(i) = standard_normal(rng);
  Vec5 x = transition_ * prev.to_vector() + Mat5(llt.matrixL()) * z;
  return TargetState::from_vector(x);
}

Gaussian MotionModel::backward_conditional(const TargetState& next) const {
  Mat5 birth_prec = birth_cov_.inverse();
  Mat5 prec = birth_prec + transition_.transpose() * transition_prec_ * transition_;
  Vec5 info = birth_prec * birth_mean_ + transition_.transpose() * transition_prec_ * next.to_vector();
  Vec5 mean = prec.ldlt().solve(info);
  return Gaussian::from_precision(mean, prec);
}

}  // namespace mtt
