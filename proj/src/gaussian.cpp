#include "mtt/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "mtt/errors.hpp"

namespace mtt {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

Gaussian Gaussian::from_covariance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  prec = 0.5 * (prec + prec.transpose());
  bool ok = true;
  Gaussian g = from_precision(mean, prec, &ok);
  if (!ok) throw NumericalError("precision is not positive definite");
  return g;
}

Gaussian Gaussian::from_precision(const Eigen::VectorXd& mean, const Eigen::MatrixXd& precision,
                                  bool* ok) {
  Gaussian g;
  g.mean_ = mean;
  g.precision_ = precision;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  bool good = llt.info() == Eigen::Success;
  if (good) {
    g.chol_lower_ = llt.matrixL();
    double s = 0.0;
    for (Eigen::Index i = 0; i < g.chol_lower_.rows(); ++i) {
      double d = g.chol_lower_(i, i);
      if (!(d > 0.0) || !std::isfinite(d)) good = false;
      s += std::log(d);
    }
    g.half_log_det_precision_ = s;
  }
  if (ok) *ok = good;
  else if (!good) throw NumericalError("precision is not positive definite");
  return g;
}

Eigen::MatrixXd Gaussian::covariance() const {
  Eigen::MatrixXd linv = chol_lower_.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(dim(), dim()));
  return linv.transpose() * linv;
}

double Gaussian::log_density(const Eigen::VectorXd& x) const {
  Eigen::VectorXd d = x - mean_;
  Eigen::VectorXd z = chol_lower_.transpose() * d;
  return -0.5 * z.squaredNorm() + half_log_det_precision_ - 0.5 * static_cast<double>(dim()) * kLog2Pi;
}

Eigen::VectorXd Gaussian::sample(Rng& rng) const {
  Eigen::VectorXd z(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) z(i) = standard_normal(rng);
  // precision = L L^T, so L^{-T} z has covariance precision^{-1}
  Eigen::VectorXd x = chol_lower_.transpose().triangularView<Eigen::Upper>().solve(z);
  return mean_ + x;
}

double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

ConditionalGaussian condition_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                       const std::vector<int>& a, const std::vector<int>& b,
                                       const Eigen::VectorXd& xb) {
  const Eigen::Index na = static_cast<Eigen::Index>(a.size());
  const Eigen::Index nb = static_cast<Eigen::Index>(b.size());
  Eigen::VectorXd ma(na), mb(nb);
  Eigen::MatrixXd saa(na, na), sab(na, nb), sbb(nb, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    ma(i) = mean(a[i]);
    for (Eigen::Index j = 0; j < na; ++j) saa(i, j) = cov(a[i], a[j]);
    for (Eigen::Index j = 0; j < nb; ++j) sab(i, j) = cov(a[i], b[j]);
  }
  for (Eigen::Index i = 0; i < nb; ++i) {
    mb(i) = mean(b[i]);
    for (Eigen::Index j = 0; j < nb; ++j) sbb(i, j) = cov(b[i], b[j]);
  }
  ConditionalGaussian out;
  if (nb == 0) {
    out.mean = ma;
    out.cov = saa;
    return out;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sbb);
  out.mean = ma + sab * ldlt.solve(xb - mb);
  out.cov = saa - sab * ldlt.solve(sab.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace mtt
