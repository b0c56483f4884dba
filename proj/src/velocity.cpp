#include "mtt/velocity.hpp"

#include <cmath>

#include "mtt/errors.hpp"
#include "mtt/gaussian.hpp"

namespace mtt {

VelocityConditional::VelocityConditional(std::span<const Vec2> positions, const ModelParams& params,
                                         const VelocityAnchor& anchor)
    : size_(positions.size()) {
  if (size_ == 0) return;
  const double dt = params.dt;
  const auto& d = params.dyn;
  for (int axis = 0; axis < 2; ++axis) {
    const double var = axis == 0 ? d.var_x : d.var_y;
    if (!(var > 0.0)) throw ConfigError("velocity conditional needs positive motion noise");
    Eigen::Matrix2d q;
    q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
    q *= var;
    const Eigen::Vector2d h(dt, 1.0);
    const Eigen::RowVector2d r = h.transpose() * q.inverse();
    const double hqh = r.dot(h);

    // Predicted (s, v) for the first state.
    Eigen::Vector2d m;
    Eigen::Matrix2d p;
    if (anchor.side == VelocityAnchor::Side::before) {
      m << anchor.state.s(axis) + dt * anchor.state.v(axis), anchor.state.v(axis);
      p = q;
    } else {
      m << (axis == 0 ? d.mu_bx : d.mu_by), 0.0;
      p << d.var_bp, 0.0, 0.0, d.var_bv;
    }

    std::vector<double> fm(size_), fv(size_);
    for (std::size_t j = 0; j < size_; ++j) {
      const double pos = positions[j](axis);
      fm[j] = m(1) + p(1, 0) / p(0, 0) * (pos - m(0));
      fv[j] = p(1, 1) - p(1, 0) * p(1, 0) / p(0, 0);
      m << pos + dt * fm[j], fm[j];
      p << dt * dt * fv[j], dt * fv[j], dt * fv[j], fv[j];
      p += q;
    }

    auto& steps = axes_[axis].steps;
    steps.assign(size_, {});
    const std::size_t last = size_ - 1;
    if (anchor.side == VelocityAnchor::Side::after) {
      const double lam = 1.0 / fv[last] + hqh;
      const Eigen::Vector2d obs(anchor.state.s(axis) - positions[last](axis), anchor.state.v(axis));
      steps[last] = {0.0, (fm[last] / fv[last] + r.dot(obs)) / lam, 1.0 / lam};
    } else {
      steps[last] = {0.0, fm[last], fv[last]};
    }
    for (std::size_t k = last; k-- > 0;) {
      const double lam = 1.0 / fv[k] + hqh;
      const double dp = positions[k + 1](axis) - positions[k](axis);
      steps[k] = {r(1) / lam, (fm[k] / fv[k] + r(0) * dp) / lam, 1.0 / lam};
    }
  }
}

std::vector<Vec2> VelocityConditional::sample(Rng& rng) const {
  std::vector<Vec2> v(size_, Vec2::Zero());
  for (int axis = 0; axis < 2; ++axis) {
    const auto& steps = axes_[axis].steps;
    double next = 0.0;
    for (std::size_t k = size_; k-- > 0;) {
      const auto& st = steps[k];
      next = st.gain * next + st.offset + std::sqrt(st.var) * standard_normal(rng);
      v[k](axis) = next;
    }
  }
  return v;
}

double VelocityConditional::log_density(std::span<const Vec2> velocities) const {
  if (velocities.size() != size_) throw ConfigError("velocity count does not match positions");
  double lp = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    const auto& steps = axes_[axis].steps;
    for (std::size_t k = 0; k < size_; ++k) {
      const double next = k + 1 < size_ ? velocities[k + 1](axis) : 0.0;
      const auto& st = steps[k];
      lp += log_normal_pdf(velocities[k](axis), st.gain * next + st.offset, st.var);
    }
  }
  return lp;
}

std::vector<Vec2> VelocityConditional::mean() const {
  std::vector<Vec2> v(size_, Vec2::Zero());
  for (int axis = 0; axis < 2; ++axis) {
    double next = 0.0;
    for (std::size_t k = size_; k-- > 0;) {
      const auto& st = axes_[axis].steps[k];
      next = st.gain * next + st.offset;
      v[k](axis) = next;
    }
  }
  return v;
}

}  // namespace mtt
