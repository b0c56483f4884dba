#pragma once

#include <Eigen/Dense>

#include "mtt/rng.hpp"

namespace mtt {

/// Multivariate normal stored through the Cholesky factor of its precision.
class Gaussian {
 public:
  Gaussian() = default;

  static Gaussian from_covariance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  /// Returns false through `ok` when the precision is not positive definite.
  static Gaussian from_precision(const Eigen::VectorXd& mean, const Eigen::MatrixXd& precision,
                                 bool* ok = nullptr);

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  Eigen::MatrixXd covariance() const;

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd chol_lower_;  // precision = L L^T
  double half_log_det_precision_ = 0.0;
};

double log_normal_pdf(double x, double mean, double var);

/// Gaussian conditioning: distribution of block `a` given block `b` = xb.
struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
ConditionalGaussian condition_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                       const std::vector<int>& a, const std::vector<int>& b,
                                       const Eigen::VectorXd& xb);

}  // namespace mtt
