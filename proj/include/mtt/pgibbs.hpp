#pragma once

#include "mtt/model.hpp"
#include "mtt/rng.hpp"

namespace mtt {

struct CsmcConfig {
  int particles = 15;
  bool ancestor_sampling = true;
};

struct CsmcResult {
  Track track;
  bool degenerate = false;  ///< reference path kept because all weights vanished
};

/// Conditional SMC update of one track's states, holding its lifespan and the other
/// tracks fixed. With a single particle the reference track is returned unchanged.
CsmcResult csmc_refresh(const Track& reference, const TrackSet& others, const ImageStack& y,
                        const ModelParams& params, const CsmcConfig& config, Rng& rng);

/// Log of the likelihood ratio of `x` at frame t against no target, given the others.
double residual_log_weight(const TargetState& x, int t, const TrackSet& others,
                           const ImageStack& y, const ModelParams& params);

}  // namespace mtt
