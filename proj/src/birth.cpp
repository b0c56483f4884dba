#include "mtt/birth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "mtt/errors.hpp"
#include "mtt/velocity.hpp"

namespace mtt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log1m_exp(double x) {
  // log(1 - exp(x)) for x <= 0
  if (x >= 0.0) return kNegInf;
  return x > -0.693 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

int direction(SegmentKind kind) { return kind == SegmentKind::extend_backward ? -1 : 1; }

// Predicted (s, P_ss) on one axis after filtering the exact positions `pos`.
std::pair<double, double> forward_position_prior(const std::vector<double>& pos, double m_s,
                                                 double m_v, Eigen::Matrix2d p,
                                                 const Eigen::Matrix2d& q, double dt) {
  Eigen::Vector2d m(m_s, m_v);
  for (double s : pos) {
    const double fm = m(1) + p(1, 0) / p(0, 0) * (s - m(0));
    const double fv = p(1, 1) - p(1, 0) * p(1, 0) / p(0, 0);
    m << s + dt * fm, fm;
    p << dt * dt * fv, dt * fv, dt * fv, fv;
    p += q;
  }
  return {m(0), p(0, 0)};
}

}  // namespace

IntensityPositionPrior birth_marginal(const ModelParams& params) {
  IntensityPositionPrior prior;
  prior.mean << params.dyn.mu_bi, params.dyn.mu_bx, params.dyn.mu_by;
  prior.cov.setZero();
  prior.cov.diagonal() << params.dyn.var_bi, params.dyn.var_bp, params.dyn.var_bp;
  return prior;
}

LaplaceFit laplace_fit(const ResidualFrame& res, Pixel peak, const IntensityPositionPrior& prior,
                       const ModelParams& params) {
  const Geometry& g = params.geom;
  const double var = params.noise_var_at(res.t);
  const double hv = g.psf_sigma * g.psf_sigma;
  const double a = filtered_value_at(res, peak, params);
  const Vec2 s(g.pitch * peak.row, g.pitch * peak.col);

  LaplaceFit fit;
  fit.center << a, s(0), s(1);

  Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
  double log_data = 0.0;
  double log_null = 0.0;
  Window w = truncation_square(s, g);
  for (int r = w.r0; r <= w.r1; ++r) {
    for (int c = w.c0; c <= w.c1; ++c) {
      const double y = res.values(r, c);
      const double gj = psf_unit(s, r, c, g);
      const Vec2 dp(g.pitch * r - s(0), g.pitch * c - s(1));
      const Vec2 dg = gj * dp / hv;
      const Eigen::Matrix2d d2g = gj * (dp * dp.transpose() / (hv * hv) - Eigen::Matrix2d::Identity() / hv);
      const double e = y - a * gj;
      hess(0, 0) -= gj * gj / var;
      const Vec2 cross = (e - a * gj) * dg / var;
      hess(0, 1) += cross(0);
      hess(0, 2) += cross(1);
      hess.block<2, 2>(1, 1) += (-a * a * dg * dg.transpose() + e * a * d2g) / var;
      log_data += log_normal_pdf(y, a * gj, var);
      log_null += log_normal_pdf(y, 0.0, var);
    }
  }
  hess(1, 0) = hess(0, 1);
  hess(2, 0) = hess(0, 2);

  Eigen::LLT<Eigen::Matrix3d> prior_llt(prior.cov);
  if (prior_llt.info() != Eigen::Success) throw NumericalError("step prior is not positive definite");
  const Eigen::Matrix3d prior_prec = prior_llt.solve(Eigen::Matrix3d::Identity());
  const Eigen::Vector3d d = fit.center - prior.mean;
  const Eigen::Matrix3d l = prior_llt.matrixL();
  double prior_log_det = 0.0;
  for (int i = 0; i < 3; ++i) prior_log_det += 2.0 * std::log(l(i, i));
  const double log_prior = -0.5 * (3.0 * kLog2Pi + prior_log_det + d.dot(prior_prec * d));

  fit.precision = -hess + prior_prec;
  fit.precision = 0.5 * (fit.precision + fit.precision.transpose());
  fit.log_null = log_null;

  bool ok = std::isfinite(a) && fit.precision.allFinite();
  if (ok) fit.proposal = Gaussian::from_precision(fit.center, fit.precision, &ok);
  fit.valid = ok;
  if (ok) {
    Eigen::LLT<Eigen::Matrix3d> llt(fit.precision);
    const Eigen::Matrix3d lp = llt.matrixL();
    double log_det = 0.0;
    for (int i = 0; i < 3; ++i) log_det += 2.0 * std::log(lp(i, i));
    fit.log_evidence = log_data + log_prior + 1.5 * kLog2Pi - 0.5 * log_det;
  } else {
    fit.log_evidence = kNegInf;
  }
  return fit;
}

double log_test_ratio(const LaplaceFit& fit, double p_h1) {
  if (!fit.valid || p_h1 <= 0.0) return kNegInf;
  if (p_h1 >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p_h1) - std::log1p(-p_h1) + fit.log_evidence - fit.log_null;
}

double test_ratio(const ResidualFrame& res, Pixel peak, double p_h1,
                  const IntensityPositionPrior& prior, const ModelParams& params) {
  return std::exp(log_test_ratio(laplace_fit(res, peak, prior, params), p_h1));
}

double birth_h1_probability(int births, double lambda) {
  if (lambda <= 0.0) return 0.0;
  // P(N > k) for N ~ Poisson(lambda) equals the regularised lower incomplete gamma P(k + 1, lambda).
  return boost::math::gamma_p(static_cast<double>(births) + 1.0, lambda);
}

double log_accept_probability(double log_rho, AcceptRule rule) {
  if (std::isnan(log_rho)) return kNegInf;
  if (rule == AcceptRule::min_one) return std::min(0.0, log_rho);
  if (log_rho == kNegInf) return kNegInf;
  if (log_rho > 0.0) return -std::log1p(std::exp(-log_rho));
  return log_rho - std::log1p(std::exp(log_rho));
}

double StepDistribution::log_place_probability() const {
  std::vector<double> w;
  w.reserve(candidates.size());
  for (const auto& c : candidates) w.push_back(c.log_weight);
  return log_sum_exp(w);
}

double StepDistribution::log_density(const Eigen::Vector3d& as) const {
  std::vector<double> terms;
  for (const auto& c : candidates) {
    if (c.log_weight == kNegInf) continue;
    terms.push_back(c.log_weight + c.fit.proposal.log_density(as));
  }
  if (terms.empty()) return kNegInf;
  return log_survival + log_sum_exp(terms);
}

IntensityPositionPrior segment_step_prior(const SegmentRequest& req,
                                          std::span<const Eigen::Vector3d> built,
                                          const ModelParams& params) {
  const auto& d = params.dyn;
  const double dt = params.dt;
  const std::size_t k = built.size();
  if (req.kind == SegmentKind::birth && k == 0) return birth_marginal(params);

  IntensityPositionPrior prior;
  prior.cov.setZero();

  if (req.kind != SegmentKind::extend_backward) {
    prior.mean(0) = k == 0 ? req.anchor.a : built[k - 1](0);
    prior.cov(0, 0) = d.var_i;
    for (int axis = 0; axis < 2; ++axis) {
      const double var = axis == 0 ? d.var_x : d.var_y;
      Eigen::Matrix2d q;
      q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
      q *= var;
      std::vector<double> pos;
      for (const auto& b : built) pos.push_back(b(1 + axis));
      double m_s, m_v;
      Eigen::Matrix2d p;
      if (req.kind == SegmentKind::birth) {
        m_s = axis == 0 ? d.mu_bx : d.mu_by;
        m_v = 0.0;
        p << d.var_bp, 0.0, 0.0, d.var_bv;
      } else {
        m_s = req.anchor.s(axis) + dt * req.anchor.v(axis);
        m_v = req.anchor.v(axis);
        p = q;
      }
      auto [mean, pss] = forward_position_prior(pos, m_s, m_v, p, q, dt);
      prior.mean(1 + axis) = mean;
      prior.cov(1 + axis, 1 + axis) = pss;
    }
    return prior;
  }

  // Backward: the new earliest state follows the birth density and the chain runs forward
  // through the constructed states to the anchor.
  const double next_a = k == 0 ? req.anchor.a : built[k - 1](0);
  const double prec = 1.0 / d.var_bi + 1.0 / d.var_i;
  prior.mean(0) = (d.mu_bi / d.var_bi + next_a / d.var_i) / prec;
  prior.cov(0, 0) = 1.0 / prec;
  const int states = static_cast<int>(k) + 2;
  Eigen::Matrix2d f;
  f << 1.0, dt, 0.0, 1.0;
  for (int axis = 0; axis < 2; ++axis) {
    const double var = axis == 0 ? d.var_x : d.var_y;
    Eigen::Matrix2d q;
    q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
    q *= var;
    const int n = 2 * states;
    Eigen::VectorXd mean(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::Matrix2d> marg(static_cast<std::size_t>(states));
    mean.segment<2>(0) << (axis == 0 ? d.mu_bx : d.mu_by), 0.0;
    marg[0] << d.var_bp, 0.0, 0.0, d.var_bv;
    for (int i = 1; i < states; ++i) {
      mean.segment<2>(2 * i) = f * mean.segment<2>(2 * (i - 1));
      marg[static_cast<std::size_t>(i)] = f * marg[static_cast<std::size_t>(i - 1)] * f.transpose() + q;
    }
    for (int j = 0; j < states; ++j) {
      Eigen::Matrix2d fp = Eigen::Matrix2d::Identity();
      for (int i = j; i < states; ++i) {
        const Eigen::Matrix2d c = fp * marg[static_cast<std::size_t>(j)];
        cov.block<2, 2>(2 * i, 2 * j) = c;
        cov.block<2, 2>(2 * j, 2 * i) = c.transpose();
        fp = f * fp;
      }
    }
    // Observed: positions of constructed states (time order) and the full anchor.
    std::vector<int> obs;
    Eigen::VectorXd xb(static_cast<Eigen::Index>(k) + 2);
    for (std::size_t i = 0; i < k; ++i) {
      obs.push_back(2 * (1 + static_cast<int>(i)));
      xb(static_cast<Eigen::Index>(i)) = built[k - 1 - i](1 + axis);
    }
    obs.push_back(2 * (states - 1));
    obs.push_back(2 * (states - 1) + 1);
    xb(static_cast<Eigen::Index>(k)) = req.anchor.s(axis);
    xb(static_cast<Eigen::Index>(k) + 1) = req.anchor.v(axis);
    auto cond = condition_gaussian(mean, cov, {0}, obs, xb);
    prior.mean(1 + axis) = cond.mean(0);
    prior.cov(1 + axis, 1 + axis) = cond.cov(0, 0);
  }
  return prior;
}

SegmentProposer::SegmentProposer(const TrackSet& tracks, const ImageStack& y,
                                 const ModelParams& params, const ProposalConfig& config,
                                 FilterCache* cache)
    : tracks_(tracks), y_(y), params_(params), config_(config), cache_(cache), own_cache_(64) {
  births_.assign(static_cast<std::size_t>(params.frames), 0);
  for (const auto& tr : tracks)
    if (tr.birth >= 1 && tr.birth <= params.frames) births_[static_cast<std::size_t>(tr.birth - 1)]++;
}

int SegmentProposer::births_at(int t) const { return births_.at(static_cast<std::size_t>(t - 1)); }

const ResidualFrame& SegmentProposer::residual(int t) {
  auto it = residuals_.find(t);
  if (it != residuals_.end()) return it->second;
  auto xs = states_at(tracks_, t);
  return residuals_.emplace(t, residual_frame(y_.frame(t), xs, t, params_)).first->second;
}

StepDistribution SegmentProposer::step_distribution(int t, const IntensityPositionPrior& prior,
                                                    const std::optional<Vec2>& window_center,
                                                    double p_h1, double log_survival) {
  const ResidualFrame& res = residual(t);
  FilterCache* cache = cache_ ? cache_ : &own_cache_;
  auto filt = cache->get(res, params_);
  const double gamma = gamma_threshold(t, params_, config_.gamma);
  std::optional<Window> region;
  if (window_center) region = search_window(*window_center, params_, config_.window_half_width);
  std::vector<Pixel> peaks;
  if (!region || !region->empty()) peaks = candidate_peaks(*filt, gamma, region);

  StepDistribution dist;
  dist.t = t;
  dist.log_survival = log_survival;
  const double log_select = -std::log(static_cast<double>(std::max<std::size_t>(peaks.size(), 1)));
  for (Pixel p : peaks) {
    StepCandidate cand;
    cand.peak = p;
    cand.fit = laplace_fit(res, p, prior, params_);
    const double log_rho = log_test_ratio(cand.fit, p_h1);
    cand.log_weight = log_select + log_accept_probability(log_rho, config_.accept);
    dist.candidates.push_back(std::move(cand));
  }
  return dist;
}

IntensityPositionPrior SegmentProposer::step_prior(const SegmentRequest& req,
                                                   std::span<const Eigen::Vector3d> built) const {
  return segment_step_prior(req, built, params_);
}

double SegmentProposer::first_step_h1(const SegmentRequest& req) const {
  if (req.kind == SegmentKind::birth) return birth_h1_probability(births_at(req.start), params_.lambda_b);
  return params_.p_s;
}

std::vector<Vec2> SegmentProposer::sample_velocities(const SegmentRequest& req,
                                                     std::span<const Vec2> positions,
                                                     Rng& rng) const {
  VelocityAnchor anchor;
  if (req.kind == SegmentKind::extend_forward) anchor = VelocityAnchor::before(req.anchor);
  if (req.kind == SegmentKind::extend_backward) anchor = VelocityAnchor::after(req.anchor);
  return VelocityConditional(positions, params_, anchor).sample(rng);
}

double SegmentProposer::log_velocity_density(const SegmentRequest& req,
                                             std::span<const TargetState> states) const {
  std::vector<Vec2> pos, vel;
  for (const auto& x : states) {
    pos.push_back(x.s);
    vel.push_back(x.v);
  }
  VelocityAnchor anchor;
  if (req.kind == SegmentKind::extend_forward) anchor = VelocityAnchor::before(req.anchor);
  if (req.kind == SegmentKind::extend_backward) anchor = VelocityAnchor::after(req.anchor);
  return VelocityConditional(pos, params_, anchor).log_density(vel);
}

std::optional<SegmentSample> SegmentProposer::sample(const SegmentRequest& req, Rng& rng) {
  const int dir = direction(req.kind);
  const int n = params_.frames;
  if (req.start < 1 || req.start > n) throw ConfigError("segment start outside the frame range");
  std::vector<Eigen::Vector3d> built;
  SegmentSample out;
  int t = req.start;
  for (;;) {
    const bool first = built.empty();
    if (t < 1 || t > n) {
      out.stop = StopReason::beyond_range;
      break;
    }
    const double log_surv = first ? 0.0 : std::log(params_.p_s);
    std::optional<Vec2> center;
    if (!first) center = Vec2(built.back()(1), built.back()(2));
    else if (req.kind != SegmentKind::birth) center = req.anchor.s;
    const double p_h1 = first ? first_step_h1(req) : params_.p_s;
    StepDistribution dist = step_distribution(t, step_prior(req, built), center, p_h1, log_surv);

    if (!first) {
      const double log_stop = log1m_exp(log_surv + dist.log_place_probability());
      if (uniform01(rng) >= params_.p_s) {
        out.stop = StopReason::not_survive;
        out.log_q += log_stop;
        break;
      }
      if (dist.candidates.empty()) {
        out.stop = StopReason::empty_candidates;
        out.log_q += log_stop;
        break;
      }
    } else if (dist.candidates.empty()) {
      return std::nullopt;
    }

    const std::size_t i = uniform_index(rng, dist.candidates.size());
    const auto& cand = dist.candidates[i];
    const double log_accept = cand.log_weight + std::log(static_cast<double>(dist.candidates.size()));
    StepRecord rec;
    rec.t = t;
    rec.peak = cand.peak;
    rec.log_rho = log_test_ratio(cand.fit, p_h1);
    rec.accept_probability = std::exp(log_accept);
    out.steps.push_back(rec);
    if (!(uniform01(rng) < rec.accept_probability)) {
      if (first) return std::nullopt;
      out.stop = StopReason::h1_rejected;
      out.log_q += log1m_exp(log_surv + dist.log_place_probability());
      break;
    }
    Eigen::Vector3d as = cand.fit.proposal.sample(rng);
    out.log_q += dist.log_density(as);
    built.push_back(as);
    t += dir;
  }

  const std::size_t len = built.size();
  std::vector<Vec2> positions(len);
  out.states.resize(len);
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t src = dir > 0 ? j : len - 1 - j;
    out.states[j].a = built[src](0);
    out.states[j].s = Vec2(built[src](1), built[src](2));
    positions[j] = out.states[j].s;
  }
  const std::vector<Vec2> vel = sample_velocities(req, positions, rng);
  for (std::size_t j = 0; j < len; ++j) out.states[j].v = vel[j];
  out.log_q += log_velocity_density(req, out.states);
  out.first_frame = dir > 0 ? req.start : req.start - static_cast<int>(len) + 1;
  return out;
}

double SegmentProposer::log_density(const SegmentRequest& req, std::span<const TargetState> states) {
  const int dir = direction(req.kind);
  const int n = params_.frames;
  if (states.empty()) return kNegInf;
  const std::size_t len = states.size();
  std::vector<Eigen::Vector3d> built;
  double lq = 0.0;
  int t = req.start;
  for (std::size_t k = 0; k < len; ++k) {
    if (t < 1 || t > n) return kNegInf;
    const TargetState& x = dir > 0 ? states[k] : states[len - 1 - k];
    const bool first = k == 0;
    const double log_surv = first ? 0.0 : std::log(params_.p_s);
    std::optional<Vec2> center;
    if (!first) center = Vec2(built.back()(1), built.back()(2));
    else if (req.kind != SegmentKind::birth) center = req.anchor.s;
    const double p_h1 = first ? first_step_h1(req) : params_.p_s;
    StepDistribution dist = step_distribution(t, step_prior(req, built), center, p_h1, log_surv);
    const Eigen::Vector3d as(x.a, x.s(0), x.s(1));
    lq += dist.log_density(as);
    if (lq == kNegInf) return kNegInf;
    built.push_back(as);
    t += dir;
  }
  if (t >= 1 && t <= n) {
    std::optional<Vec2> center = Vec2(built.back()(1), built.back()(2));
    StepDistribution dist =
        step_distribution(t, step_prior(req, built), center, params_.p_s, std::log(params_.p_s));
    lq += log1m_exp(dist.log_survival + dist.log_place_probability());
  }
  return lq + log_velocity_density(req, states);
}

std::optional<BirthSample> sample_birth_track(const TrackSet& tracks, const ImageStack& y,
                                              const ModelParams& params, Rng& rng,
                                              std::optional<int> fixed_birth,
                                              const ProposalConfig& config, FilterCache* cache) {
  int tb;
  double log_q0 = 0.0;
  if (fixed_birth) {
    tb = *fixed_birth;
  } else {
    tb = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(params.frames)));
    log_q0 = -std::log(static_cast<double>(params.frames));
  }
  SegmentProposer proposer(tracks, y, params, config, cache);
  SegmentRequest req;
  req.kind = SegmentKind::birth;
  req.start = tb;
  auto seg = proposer.sample(req, rng);
  if (!seg) return std::nullopt;
  BirthSample out;
  out.track.birth = tb;
  out.track.states = std::move(seg->states);
  out.log_q = log_q0 + seg->log_q;
  out.steps = std::move(seg->steps);
  out.stop = seg->stop;
  return out;
}

double birth_density(const Track& track, const TrackSet& tracks, const ImageStack& y,
                     const ModelParams& params, std::optional<int> fixed_birth,
                     const ProposalConfig& config, FilterCache* cache) {
  double log_q0 = 0.0;
  if (fixed_birth) {
    if (track.birth != *fixed_birth) return kNegInf;
  } else {
    log_q0 = -std::log(static_cast<double>(params.frames));
  }
  if (track.birth < 1 || track.last() > params.frames) return kNegInf;
  SegmentProposer proposer(tracks, y, params, config, cache);
  SegmentRequest req;
  req.kind = SegmentKind::birth;
  req.start = track.birth;
  return log_q0 + proposer.log_density(req, track.states);
}

}  // namespace mtt
