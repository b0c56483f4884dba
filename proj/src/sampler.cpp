#include "mtt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtt/errors.hpp"
#include "mtt/representation.hpp"

namespace mtt {

namespace {

void check_cached(ChainState& chain, const ImageStack& y, const SamplerConfig& config) {
  const double full = log_joint(chain.latent.tracks, chain.params, y);
  const double cached = chain.latent.log_joint;
  if (std::abs(full - cached) > config.check_tol * std::max(1.0, std::abs(full))) {
    std::ostringstream os;
    os.precision(17);
    os << "cached log joint " << cached << " differs from full evaluation " << full << " after sweep "
       << chain.sweeps;
    throw NumericalError(os.str());
  }
  chain.latent.log_joint = full;
}

}  // namespace

ChainState init_chain(const ImageStack& y, const ModelParams& params, const TrackSet& tracks,
                      std::uint64_t seed) {
  params.validate();
  ChainState chain;
  chain.params = params;
  chain.latent.tracks = tracks;
  canonicalize(chain.latent.tracks);
  chain.latent.log_joint = log_joint(chain.latent.tracks, params, y);
  if (!std::isfinite(chain.latent.log_joint))
    throw ConfigError("initial track set has zero density under the model");
  chain.rng.seed(seed);
  return chain;
}

void run_iteration(ChainState& chain, const ImageStack& y, const SamplerConfig& config,
                   FilterCache* cache) {
  FilterCache local(128);
  if (!cache) cache = &local;
  {
    const MoveContext ctx{y, chain.params, config.proposal, cache};
    for (int i = 0; i < config.n1; ++i) {
      sweep(chain.latent, ctx, chain.rng, config.move_probs, &chain.stats);
      chain.sweeps++;
      if (config.check_every > 0 && chain.sweeps % config.check_every == 0) check_cached(chain, y, config);
    }
  }

  if (config.n2 > 0 && !chain.latent.tracks.empty()) {
    for (int pass = 0; pass < config.n2; ++pass) {
      TrackSet& tracks = chain.latent.tracks;
      std::vector<std::size_t> order(tracks.size());
      std::iota(order.begin(), order.end(), 0);
      if (config.random_track_order) std::shuffle(order.begin(), order.end(), chain.rng);
      for (std::size_t k : order) {
        TrackSet others;
        others.reserve(tracks.size() - 1);
        for (std::size_t j = 0; j < tracks.size(); ++j)
          if (j != k) others.push_back(tracks[j]);
        CsmcResult res = csmc_refresh(tracks[k], others, y, chain.params, config.csmc, chain.rng);
        if (res.degenerate) chain.degenerate_csmc++;
        tracks[k] = std::move(res.track);
      }
      canonicalize(tracks);
    }
    chain.latent.log_joint = log_joint(chain.latent.tracks, chain.params, y);
  }

  for (int u = 0; u < config.n3; ++u) {
    if (config.param_update == ParamUpdate::gibbs) {
      update_discrete_params(chain.latent.tracks, config.prior, chain.params, chain.rng);
      update_observation_params(chain.latent.tracks, y, config.prior, chain.params, chain.rng);
      update_dynamics_params(chain.latent.tracks, config.prior, chain.params, chain.rng);
    } else {
      const TrackSet& tracks = chain.latent.tracks;
      auto target = [&](const ModelParams& p) {
        const double lp = log_param_prior(p, config.prior);
        if (!std::isfinite(lp)) return lp;
        return lp + log_joint(tracks, p, y);
      };
      std::vector<double> steps = config.mh_steps;
      if (steps.empty()) steps.assign(param_vector(chain.params).size(), 0.1);
      mh_update(chain.params, target, steps, chain.rng);
    }
    chain.latent.log_joint = log_joint(chain.latent.tracks, chain.params, y);
  }
  chain.iteration++;
}

SampleRecord make_record(const ChainState& chain) {
  SampleRecord rec;
  rec.iteration = chain.iteration;
  rec.tracks = chain.latent.tracks;
  rec.params = chain.params;
  rec.log_joint = chain.latent.log_joint;
  rec.stats = chain.stats;
  rec.counts = frame_counts(chain.latent.tracks, chain.params.frames).alive;
  return rec;
}

void run_chain(ChainState& chain, const ImageStack& y, const SamplerConfig& config, long iterations,
               const std::function<void(const SampleRecord&)>& sink) {
  FilterCache cache(256);
  for (long it = 0; it < iterations; ++it) {
    run_iteration(chain, y, config, &cache);
    if (sink) sink(make_record(chain));
  }
}

}  // namespace mtt
