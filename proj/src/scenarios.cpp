#include "mtt/scenarios.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "mtt/dynamics.hpp"
#include "mtt/errors.hpp"

#include "mtt/representation.hpp"

namespace mtt {

namespace {

constexpr std::uint64_t kScenarioSeed = 20240611;

struct TrackDesign {
  int birth;
  int last;
  int anchor;                         ///< frame whose state is fixed
  std::optional<TargetState> state;  ///< empty: birth state drawn from the birth density
};

// Samples a track from the motion model through a fixed state at the anchor frame,
// running the dynamics forwards and their time reversal backwards.
Track sample_through(const TrackDesign& d, const MotionModel& model, Rng& rng) {
  const Mat5 f_inv = model.transition().inverse();
  const Gaussian back_noise =
      Gaussian::from_covariance(Eigen::VectorXd::Zero(5), f_inv * model.transition_cov() * f_inv.transpose());
  std::vector<TargetState> states(static_cast<std::size_t>(d.last - d.birth + 1));
  const auto idx = [&](int t) { return static_cast<std::size_t>(t - d.birth); };
  states[idx(d.anchor)] = d.state ? *d.state : model.sample_initial(rng);
  for (int t = d.anchor + 1; t <= d.last; ++t) states[idx(t)] = model.sample_transition(states[idx(t - 1)], rng);
  for (int t = d.anchor - 1; t >= d.birth; --t) {
    const Vec5 prev = f_inv * states[idx(t + 1)].to_vector() + Vec5(back_noise.sample(rng));
    states[idx(t)] = TargetState::from_vector(prev);
  }
  Track tr;
  tr.birth = d.birth;
  tr.states = std::move(states);
  return tr;
}

bool inside(const Track& tr, const ModelParams& params, double margin) {
  for (const auto& x : tr.states)
    if (x.s.x() < margin || x.s.y() < margin || x.s.x() > params.geom.rows - 1 - margin ||
        x.s.y() > params.geom.cols - 1 - margin || x.a < 20.0)
      return false;
  return true;
}

// Smallest separation over shared frames, ignoring frames within `skip` of `around`.
double min_distance(const Track& a, const Track& b, int around = 0, int skip = -1) {
  double best = std::numeric_limits<double>::infinity();
  for (int t = std::max(a.birth, b.birth); t <= std::min(a.last(), b.last()); ++t)
    if (std::abs(t - around) > skip) best = std::min(best, (a.at(t).s - b.at(t).s).norm());
  return best;
}

TargetState make_state(double a, double s1, double s2, double v1, double v2) {
  TargetState x;
  x.a = a;
  x.s = Vec2(s1, s2);
  x.v = Vec2(v1, v2);
  return x;
}

}  // namespace

ModelParams crossing_scenario_params() {
  DynamicsParams dyn;
  dyn.mu_bi = 30.0;
  dyn.mu_bx = 31.5;
  dyn.mu_by = 31.5;
  dyn.var_bi = 4.0;
  dyn.var_bp = 25.0;
  dyn.var_bv = 3.0;
  dyn.var_i = 0.5;
  dyn.var_x = 0.3;
  dyn.var_y = 0.7;
  return make_params(64, 64, 20, dyn, 0.95, 0.25, 0.0, 1.0);
}

TrackSet crossing_scenario_tracks(const ModelParams& params) {
  const MotionModel model(params);
  // The crossing pair passes through (31.5, 31.5) at frame 6 on perpendicular headings, so
  // its birth states stay typical of the birth density. The others start from that density.
  const std::vector<TrackDesign> designs{
      {1, 20, 6, make_state(30.0, 31.5, 31.0, 1.0, 1.0)},
      {1, 20, 6, make_state(30.0, 31.5, 32.0, 1.0, -1.0)},
      {1, 14, 1, std::nullopt},
      {5, 16, 5, std::nullopt},
      {8, 20, 8, std::nullopt},
  };
  Rng rng(kScenarioSeed);
  TrackSet tracks;
  for (std::size_t k = 0; k < designs.size(); ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100000) throw NumericalError("cannot place scenario track");
      Track tr = sample_through(designs[k], model, rng);
      if (!inside(tr, params, 3.0)) continue;
      bool clear = true;
      for (std::size_t j = 0; j < tracks.size(); ++j) {
        const bool pair = (k == 1 && j == 0);
        const double d = pair ? min_distance(tr, tracks[j], designs[k].anchor, 3) : min_distance(tr, tracks[j]);
        if (d < 6.0) clear = false;
      }
      if (clear) {
        tracks.push_back(std::move(tr));
        break;
      }
    }
  }
  canonicalize(tracks);
  return tracks;
}

ModelParams perturbed_params(const ModelParams& truth) {
  ModelParams p = truth;
  p.dyn.mu_bi = 1.5 * truth.dyn.mu_bi;
  p.dyn.mu_bx = truth.dyn.mu_bx + 10.0;
  p.dyn.mu_by = truth.dyn.mu_by + 5.0;
  p.dyn.var_bi = 2.0 * truth.dyn.var_bi;
  p.dyn.var_bp = 2.0 * truth.dyn.var_bp;
  p.dyn.var_bv = 2.0 * truth.dyn.var_bv;
  p.dyn.var_i = 3.0;
  p.dyn.var_x = 1.0;
  p.dyn.var_y = 1.5;
  p.p_s = 0.6;
  p.lambda_b = 1.0;
  for (auto& v : p.noise_var) v = 4.0;
  return p;
}

}  // namespace mtt
