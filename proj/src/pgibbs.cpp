#include "mtt/pgibbs.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>

#include "mtt/dynamics.hpp"
#include "mtt/errors.hpp"
#include "mtt/filtering.hpp"
#include "mtt/log.hpp"

namespace mtt {

namespace {

std::mutex g_log_mutex;
LogSink g_sink;

double weight_on_residual(const TargetState& x, const ResidualFrame& res, const ModelParams& params) {
  const Geometry& g = params.geom;
  const double var = params.noise_var_at(res.t);
  Window w = truncation_square(x.s, g);
  double acc = 0.0;
  for (int r = w.r0; r <= w.r1; ++r)
    for (int c = w.c0; c <= w.c1; ++c) {
      const double m = x.a * psf_unit(x.s, r, c, g);
      acc += m * (res.values(r, c) - 0.5 * m);
    }
  return acc / var;
}

bool any_finite(const std::vector<double>& w) {
  for (double v : w)
    if (std::isfinite(v)) return true;
  return false;
}

}  // namespace

void set_warning_sink(LogSink sink) {
  std::lock_guard lock(g_log_mutex);
  g_sink = std::move(sink);
}

void log_warning(const std::string& message) {
  std::lock_guard lock(g_log_mutex);
  if (g_sink) g_sink(message);
  else std::cerr << "warning: " << message << '\n';
}

double residual_log_weight(const TargetState& x, int t, const TrackSet& others,
                           const ImageStack& y, const ModelParams& params) {
  auto rest = states_at(others, t);
  ResidualFrame res = residual_frame(y.frame(t), rest, t, params);
  return weight_on_residual(x, res, params);
}

CsmcResult csmc_refresh(const Track& reference, const TrackSet& others, const ImageStack& y,
                        const ModelParams& params, const CsmcConfig& config, Rng& rng) {
  CsmcResult result;
  result.track = reference;
  const int n_part = config.particles;
  if (n_part < 1) throw ConfigError("conditional SMC needs at least one particle");
  if (n_part == 1) return result;
  const std::size_t len = reference.states.size();
  const std::size_t np = static_cast<std::size_t>(n_part);
  const MotionModel model(params);

  std::vector<ResidualFrame> res;
  res.reserve(len);
  for (std::size_t k = 0; k < len; ++k) {
    const int t = reference.birth + static_cast<int>(k);
    auto rest = states_at(others, t);
    res.push_back(residual_frame(y.frame(t), rest, t, params));
  }

  std::vector<std::vector<TargetState>> xs(len, std::vector<TargetState>(np));
  std::vector<std::vector<std::size_t>> anc(len, std::vector<std::size_t>(np, 0));
  std::vector<std::vector<double>> lw(len, std::vector<double>(np));

  auto degenerate = [&](std::size_t k) {
    if (any_finite(lw[k])) return false;
    log_warning("conditional SMC weights vanished at frame " +
                std::to_string(reference.birth + static_cast<int>(k)) + "; keeping the reference path");
    result.degenerate = true;
    return true;
  };

  for (std::size_t j = 0; j < np; ++j) {
    xs[0][j] = j == 0 ? reference.states[0] : model.sample_initial(rng);
    lw[0][j] = weight_on_residual(xs[0][j], res[0], params);
  }
  if (degenerate(0)) return result;

  for (std::size_t k = 1; k < len; ++k) {
    for (std::size_t j = 1; j < np; ++j) {
      anc[k][j] = sample_log_weights(rng, lw[k - 1]);
      xs[k][j] = model.sample_transition(xs[k - 1][anc[k][j]], rng);
    }
    xs[k][0] = reference.states[k];
    if (config.ancestor_sampling) {
      std::vector<double> la(np);
      for (std::size_t j = 0; j < np; ++j)
        la[j] = lw[k - 1][j] + model.log_transition(xs[k][0], xs[k - 1][j]);
      if (!any_finite(la)) {
        log_warning("ancestor weights vanished; keeping the reference ancestry");
        anc[k][0] = 0;
      } else {
        anc[k][0] = sample_log_weights(rng, la);
      }
    }
    for (std::size_t j = 0; j < np; ++j) lw[k][j] = weight_on_residual(xs[k][j], res[k], params);
    if (degenerate(k)) {
      result.track = reference;
      return result;
    }
  }

  std::size_t j = sample_log_weights(rng, lw[len - 1]);
  for (std::size_t k = len; k-- > 0;) {
    result.track.states[k] = xs[k][j];
    j = anc[k][j];
  }
  return result;
}

}  // namespace mtt
