#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mtt/learning.hpp"
#include "mtt/moves.hpp"
#include "mtt/pgibbs.hpp"

namespace mtt {

enum class ParamUpdate { gibbs, metropolis };

struct SamplerConfig {
  int n1 = 30;  ///< move sweeps per iteration
  int n2 = 1;   ///< conditional SMC passes over all tracks per iteration
  int n3 = 0;   ///< parameter updates per iteration
  MoveProbabilities move_probs = kDefaultMoveProbabilities;
  ProposalConfig proposal;
  CsmcConfig csmc;
  bool random_track_order = false;
  PriorConfig prior;
  ParamUpdate param_update = ParamUpdate::gibbs;
  std::vector<double> mh_steps;  ///< per component, used by the metropolis update
  int check_every = 50;          ///< sweeps between full log-joint checks; 0 disables
  double check_tol = 1e-6;
};

struct ChainState {
  LatentState latent;
  ModelParams params;
  AcceptanceStats stats;
  long iteration = 0;
  long sweeps = 0;
  long degenerate_csmc = 0;
  Rng rng;
};

ChainState init_chain(const ImageStack& y, const ModelParams& params, const TrackSet& tracks,
                      std::uint64_t seed);

struct SampleRecord {
  long iteration = 0;
  TrackSet tracks;
  ModelParams params;
  double log_joint = 0.0;
  AcceptanceStats stats;
  std::vector<int> counts;
};

/// One iteration: n1 move sweeps, n2 conditional SMC passes, n3 parameter updates.
void run_iteration(ChainState& chain, const ImageStack& y, const SamplerConfig& config,
                   FilterCache* cache = nullptr);

SampleRecord make_record(const ChainState& chain);

/// Runs `iterations` iterations and passes each resulting sample to `sink`.
void run_chain(ChainState& chain, const ImageStack& y, const SamplerConfig& config,
               long iterations, const std::function<void(const SampleRecord&)>& sink);

}  // namespace mtt
