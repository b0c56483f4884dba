#include "mtt/learning.hpp"

#include <cmath>
#include <limits>

#include "mtt/errors.hpp"

namespace mtt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_inverse_gamma(double x, const InverseGammaPrior& p) {
  if (!(x > 0.0)) return kNegInf;
  return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) - p.scale / x;
}

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

struct MeanVar {
  int count = 0;
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations from the mean
};

MeanVar summarize(const std::vector<double>& xs) {
  MeanVar m;
  m.count = static_cast<int>(xs.size());
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.ss += (x - m.mean) * (x - m.mean);
  return m;
}

// Pixel residuals e = y - target responses for frame t, without the background.
Image target_free(const TrackSet& tracks, const ImageStack& y, const ModelParams& params, int t) {
  Image e = y.frame(t);
  for (const auto& x : states_at(tracks, t)) add_target(e, x, params.geom, -1.0);
  return e;
}

struct InitialStats {
  std::vector<double> a;
  std::vector<double> s[2];
  double v_sq = 0.0;
};

InitialStats initial_stats(const TrackSet& tracks) {
  InitialStats st;
  for (const auto& tr : tracks) {
    const auto& x = tr.states.front();
    st.a.push_back(x.a);
    st.s[0].push_back(x.s(0));
    st.s[1].push_back(x.s(1));
    st.v_sq += x.v.squaredNorm();
  }
  return st;
}

struct IntensityStats {
  int count = 0;
  double sq = 0.0;
};

IntensityStats intensity_stats(const TrackSet& tracks) {
  IntensityStats st;
  for (const auto& tr : tracks)
    for (std::size_t j = 1; j < tr.states.size(); ++j) {
      const double d = tr.states[j].a - tr.states[j - 1].a;
      st.sq += d * d;
      st.count++;
    }
  return st;
}

}  // namespace

void PriorConfig::validate() const {
  for (const auto* p : {&var_bi, &var_bp, &var_bv, &var_i, &var_x, &var_y, &noise_var})
    if (!(p->shape > 0.0) || !(p->scale > 0.0)) throw ConfigError("inverse-gamma priors need positive parameters");
  for (const auto* p : {&mu_bi, &mu_pos, &background})
    if (!(p->n0 > 0.0) || !std::isfinite(p->mean)) throw ConfigError("normal priors need positive n0");
  if (!(p_s.a > 0.0) || !(p_s.b > 0.0)) throw ConfigError("beta prior needs positive parameters");
  if (!(lambda_b.shape > 0.0) || !(lambda_b.scale > 0.0)) throw ConfigError("gamma prior needs positive parameters");
}

Eigen::Matrix2d axis_noise_shape(double dt) {
  Eigen::Matrix2d q;
  q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
  return q;
}

AxisNoiseStats axis_noise_stats(const TrackSet& tracks, int axis, double dt,
                                const Eigen::Matrix2d& shape) {
  const Eigen::Matrix2d inv = shape.inverse();
  AxisNoiseStats st;
  for (const auto& tr : tracks)
    for (std::size_t j = 1; j < tr.states.size(); ++j) {
      const auto& p = tr.states[j - 1];
      const auto& x = tr.states[j];
      const Eigen::Vector2d u(x.s(axis) - p.s(axis) - dt * p.v(axis), x.v(axis) - p.v(axis));
      st.quad += u.dot(inv * u);
      st.count++;
    }
  return st;
}

double log_param_prior(const ModelParams& params, const PriorConfig& prior) {
  const auto& d = params.dyn;
  if (!(params.p_s > 0.0 && params.p_s < 1.0) || !(params.lambda_b > 0.0)) return kNegInf;
  double lp = 0.0;
  lp += log_inverse_gamma(d.var_bi, prior.var_bi);
  lp += log_inverse_gamma(d.var_bp, prior.var_bp);
  lp += log_inverse_gamma(d.var_bv, prior.var_bv);
  lp += log_inverse_gamma(d.var_i, prior.var_i);
  lp += log_inverse_gamma(d.var_x, prior.var_x);
  lp += log_inverse_gamma(d.var_y, prior.var_y);
  if (lp == kNegInf) return kNegInf;
  lp += log_normal(d.mu_bi, prior.mu_bi.mean, d.var_bi / prior.mu_bi.n0);
  lp += log_normal(d.mu_bx, prior.mu_pos.mean, d.var_bp / prior.mu_pos.n0);
  lp += log_normal(d.mu_by, prior.mu_pos.mean, d.var_bp / prior.mu_pos.n0);
  lp += (prior.p_s.a - 1.0) * std::log(params.p_s) + (prior.p_s.b - 1.0) * std::log1p(-params.p_s) +
        std::lgamma(prior.p_s.a + prior.p_s.b) - std::lgamma(prior.p_s.a) - std::lgamma(prior.p_s.b);
  lp += (prior.lambda_b.shape - 1.0) * std::log(params.lambda_b) - params.lambda_b / prior.lambda_b.scale -
        std::lgamma(prior.lambda_b.shape) - prior.lambda_b.shape * std::log(prior.lambda_b.scale);
  for (int t = 1; t <= params.frames; ++t) {
    const double v = params.noise_var_at(t);
    const double l = log_inverse_gamma(v, prior.noise_var);
    if (l == kNegInf) return kNegInf;
    lp += l + log_normal(params.background_at(t), prior.background.mean, v / prior.background.n0);
  }
  return lp;
}

ModelParams sample_param_prior(const ModelParams& base, const PriorConfig& prior, Rng& rng) {
  ModelParams p = base;
  auto& d = p.dyn;
  d.var_bi = sample_inverse_gamma(rng, prior.var_bi.shape, prior.var_bi.scale);
  d.mu_bi = prior.mu_bi.mean + std::sqrt(d.var_bi / prior.mu_bi.n0) * standard_normal(rng);
  d.var_bp = sample_inverse_gamma(rng, prior.var_bp.shape, prior.var_bp.scale);
  d.mu_bx = prior.mu_pos.mean + std::sqrt(d.var_bp / prior.mu_pos.n0) * standard_normal(rng);
  d.mu_by = prior.mu_pos.mean + std::sqrt(d.var_bp / prior.mu_pos.n0) * standard_normal(rng);
  d.var_bv = sample_inverse_gamma(rng, prior.var_bv.shape, prior.var_bv.scale);
  d.var_i = sample_inverse_gamma(rng, prior.var_i.shape, prior.var_i.scale);
  d.var_x = sample_inverse_gamma(rng, prior.var_x.shape, prior.var_x.scale);
  d.var_y = sample_inverse_gamma(rng, prior.var_y.shape, prior.var_y.scale);
  p.p_s = sample_beta(rng, prior.p_s.a, prior.p_s.b);
  p.lambda_b = sample_gamma(rng, prior.lambda_b.shape, prior.lambda_b.scale);
  p.background.assign(static_cast<std::size_t>(base.frames), 0.0);
  p.noise_var.assign(static_cast<std::size_t>(base.frames), 1.0);
  for (std::size_t t = 0; t < p.noise_var.size(); ++t) {
    p.noise_var[t] = sample_inverse_gamma(rng, prior.noise_var.shape, prior.noise_var.scale);
    p.background[t] =
        prior.background.mean + std::sqrt(p.noise_var[t] / prior.background.n0) * standard_normal(rng);
  }
  return p;
}

void update_discrete_params(const TrackSet& tracks, const PriorConfig& prior, ModelParams& params,
                            Rng& rng) {
  const FrameCounts fc = frame_counts(tracks, params.frames);
  double survived = 0.0, ended = 0.0, born = 0.0;
  for (int t = 1; t <= params.frames; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    born += fc.births[i];
    if (t >= 2) {
      survived += fc.survived[i];
      ended += fc.ended[i];
    }
  }
  params.p_s = sample_beta(rng, prior.p_s.a + survived, prior.p_s.b + ended);
  const double rate = 1.0 / prior.lambda_b.scale + static_cast<double>(params.frames);
  params.lambda_b = sample_gamma(rng, prior.lambda_b.shape + born, 1.0 / rate);
}

void update_observation_params(const TrackSet& tracks, const ImageStack& y,
                               const PriorConfig& prior, ModelParams& params, Rng& rng) {
  const auto& nb = prior.background;
  for (int t = 1; t <= params.frames; ++t) {
    const Image e = target_free(tracks, y, params, t);
    const double m = static_cast<double>(e.size());
    const double mean = e.mean();
    const double ss = (e.array() - mean).square().sum();
    const double nm = nb.n0 + m;
    const double shape = prior.noise_var.shape + 0.5 * m;
    const double scale =
        prior.noise_var.scale + 0.5 * (ss + nb.n0 * m * (mean - nb.mean) * (mean - nb.mean) / nm);
    const double var = sample_inverse_gamma(rng, shape, scale);
    const double mu = (nb.n0 * nb.mean + m * mean) / nm;
    params.noise_var[static_cast<std::size_t>(t - 1)] = var;
    params.background[static_cast<std::size_t>(t - 1)] = mu + std::sqrt(var / nm) * standard_normal(rng);
  }
}

void update_dynamics_params(const TrackSet& tracks, const PriorConfig& prior, ModelParams& params,
                            Rng& rng) {
  auto& d = params.dyn;
  const IntensityStats is = intensity_stats(tracks);
  d.var_i = sample_inverse_gamma(rng, prior.var_i.shape + 0.5 * is.count, prior.var_i.scale + 0.5 * is.sq);

  const Eigen::Matrix2d shape = axis_noise_shape(params.dt);
  const AxisNoiseStats sx = axis_noise_stats(tracks, 0, params.dt, shape);
  const AxisNoiseStats sy = axis_noise_stats(tracks, 1, params.dt, shape);
  d.var_x = sample_inverse_gamma(rng, prior.var_x.shape + sx.count, prior.var_x.scale + 0.5 * sx.quad);
  d.var_y = sample_inverse_gamma(rng, prior.var_y.shape + sy.count, prior.var_y.scale + 0.5 * sy.quad);

  const InitialStats st = initial_stats(tracks);
  const double k = static_cast<double>(tracks.size());

  const MeanVar ma = summarize(st.a);
  {
    const auto& p = prior.mu_bi;
    const double nk = p.n0 + k;
    const double scale = prior.var_bi.scale +
                         0.5 * (ma.ss + p.n0 * k * (ma.mean - p.mean) * (ma.mean - p.mean) / nk);
    d.var_bi = sample_inverse_gamma(rng, prior.var_bi.shape + 0.5 * k, scale);
    d.mu_bi = (p.n0 * p.mean + k * ma.mean) / nk + std::sqrt(d.var_bi / nk) * standard_normal(rng);
  }
  {
    const auto& p = prior.mu_pos;
    const double nk = p.n0 + k;
    double scale = prior.var_bp.scale;
    MeanVar ms[2] = {summarize(st.s[0]), summarize(st.s[1])};
    for (const auto& m : ms) scale += 0.5 * (m.ss + p.n0 * k * (m.mean - p.mean) * (m.mean - p.mean) / nk);
    d.var_bp = sample_inverse_gamma(rng, prior.var_bp.shape + k, scale);
    d.mu_bx = (p.n0 * p.mean + k * ms[0].mean) / nk + std::sqrt(d.var_bp / nk) * standard_normal(rng);
    d.mu_by = (p.n0 * p.mean + k * ms[1].mean) / nk + std::sqrt(d.var_bp / nk) * standard_normal(rng);
  }
  d.var_bv = sample_inverse_gamma(rng, prior.var_bv.shape + k, prior.var_bv.scale + 0.5 * st.v_sq);
}

SurrogateEstimate surrogate_mle(const TrackSet& tracks, const ImageStack& y, const ModelParams& base) {
  SurrogateEstimate out;
  out.params = base;
  ModelParams& p = out.params;
  auto& d = p.dyn;
  const int n = base.frames;

  const FrameCounts fc = frame_counts(tracks, n);
  double survived = 0.0, at_risk = 0.0, born = 0.0;
  for (int t = 1; t <= n; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    born += fc.births[i];
    if (t >= 2) {
      survived += fc.survived[i];
      at_risk += fc.alive[i - 1];
    }
  }
  if (at_risk > 0.0) p.p_s = survived / at_risk;
  else out.undefined.push_back("p_s");
  p.lambda_b = born / static_cast<double>(n);

  for (int t = 1; t <= n; ++t) {
    const Image e = target_free(tracks, y, base, t);
    const double mean = e.mean();
    const double var = (e.array() - mean).square().mean();
    p.background[static_cast<std::size_t>(t - 1)] = mean;
    // Rounding in the subtraction leaves a residue far below any real noise level.
    const double floor = std::pow(1e-12 * (1.0 + std::abs(mean)), 2);
    if (var > floor) p.noise_var[static_cast<std::size_t>(t - 1)] = var;
    else out.zero_noise = true;
  }

  const InitialStats st = initial_stats(tracks);
  const int k = static_cast<int>(tracks.size());
  if (k >= 1) {
    const MeanVar ma = summarize(st.a);
    d.mu_bi = ma.mean;
    const MeanVar mx = summarize(st.s[0]);
    const MeanVar my = summarize(st.s[1]);
    d.mu_bx = mx.mean;
    d.mu_by = my.mean;
    if (k >= 2) {
      d.var_bi = ma.ss / k;
      d.var_bp = (mx.ss + my.ss) / (2.0 * k);
    } else {
      out.undefined.insert(out.undefined.end(), {"var_bi", "var_bp"});
    }
    if (st.v_sq > 0.0) d.var_bv = st.v_sq / (2.0 * k);
    else out.undefined.push_back("var_bv");
  } else {
    out.undefined.insert(out.undefined.end(), {"mu_bi", "mu_bx", "mu_by", "var_bi", "var_bp", "var_bv"});
  }

  const IntensityStats is = intensity_stats(tracks);
  const Eigen::Matrix2d shape = axis_noise_shape(base.dt);
  const AxisNoiseStats sx = axis_noise_stats(tracks, 0, base.dt, shape);
  const AxisNoiseStats sy = axis_noise_stats(tracks, 1, base.dt, shape);
  if (is.count > 0) {
    d.var_i = is.sq / is.count;
    d.var_x = sx.quad / (2.0 * sx.count);
    d.var_y = sy.quad / (2.0 * sy.count);
  } else {
    out.undefined.insert(out.undefined.end(), {"var_i", "var_x", "var_y"});
  }
  return out;
}

int mh_update(ModelParams& params, const ParamLogTarget& log_target,
              const std::vector<double>& step_sizes, Rng& rng) {
  std::vector<double> vec = param_vector(params);
  if (step_sizes.size() != vec.size()) throw ConfigError("one step size is needed per parameter");
  double current = log_target(params);
  int accepted = 0;
  ModelParams cand = params;
  for (std::size_t i = 0; i < vec.size(); ++i) {
    const double step = step_sizes[i];
    if (!(step > 0.0)) {
      ++accepted;
      continue;
    }
    const double x = vec[i];
    const double z = step * standard_normal(rng);
    double xn = x;
    double log_jac = 0.0;
    switch (param_scale(i, params.frames)) {
      case ParamScale::identity:
        xn = x + z;
        break;
      case ParamScale::log:
        xn = x * std::exp(z);
        log_jac = std::log(xn) - std::log(x);
        break;
      case ParamScale::logit: {
        const double u = std::log(x) - std::log1p(-x) + z;
        xn = 1.0 / (1.0 + std::exp(-u));
        log_jac = std::log(xn) + std::log1p(-xn) - std::log(x) - std::log1p(-x);
        break;
      }
    }
    std::vector<double> cv = vec;
    cv[i] = xn;
    assign_param_vector(cand, cv);
    const double lt = log_target(cand);
    const double log_a = lt - current + log_jac;
    if (std::isfinite(lt) && std::log(uniform01(rng)) < log_a) {
      vec = std::move(cv);
      current = lt;
      ++accepted;
    }
  }
  assign_param_vector(params, vec);
  return accepted;
}

}  // namespace mtt
