#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtt/model.hpp"
#include "mtt/rng.hpp"

namespace mtt {

struct InverseGammaPrior {
  double shape = 0.01;
  double scale = 0.01;
};

/// Normal prior on a mean with precision n0 / variance.
struct NormalMeanPrior {
  double mean = 0.0;
  double n0 = 0.01;
};

struct GammaPrior {
  double shape = 0.01;
  double scale = 100.0;
};

struct BetaPrior {
  double a = 1.0;
  double b = 1.0;
};

/// Conjugate priors for every parameter component.
struct PriorConfig {
  NormalMeanPrior mu_bi;
  NormalMeanPrior mu_pos;  ///< shared by mu_bx and mu_by
  NormalMeanPrior background;
  InverseGammaPrior var_bi;
  InverseGammaPrior var_bp;
  InverseGammaPrior var_bv;
  InverseGammaPrior var_i;
  InverseGammaPrior var_x;
  InverseGammaPrior var_y;
  InverseGammaPrior noise_var;
  BetaPrior p_s;
  GammaPrior lambda_b;

  static PriorConfig diffuse() { return {}; }
  void validate() const;
};

double log_param_prior(const ModelParams& params, const PriorConfig& prior);

/// Draws every component of theta from its prior; geometry and frame count come from `base`.
ModelParams sample_param_prior(const ModelParams& base, const PriorConfig& prior, Rng& rng);

/// Survival probability and birth rate from their Beta and Gamma posteriors.
void update_discrete_params(const TrackSet& tracks, const PriorConfig& prior,
                            ModelParams& params, Rng& rng);

/// Per-frame background and noise variance from their normal-inverse-gamma posteriors.
void update_observation_params(const TrackSet& tracks, const ImageStack& y,
                               const PriorConfig& prior, ModelParams& params, Rng& rng);

/// Birth and motion parameters from their conjugate posteriors.
void update_dynamics_params(const TrackSet& tracks, const PriorConfig& prior,
                            ModelParams& params, Rng& rng);

/// Sufficient statistics for one spatial axis of the motion noise.
struct AxisNoiseStats {
  int count = 0;
  double quad = 0.0;  ///< sum of u^T shape^-1 u over transitions
};
AxisNoiseStats axis_noise_stats(const TrackSet& tracks, int axis, double dt,
                                const Eigen::Matrix2d& shape);
Eigen::Matrix2d axis_noise_shape(double dt);

/// Closed-form estimates from a fully known track set.
struct SurrogateEstimate {
  ModelParams params;
  std::vector<std::string> undefined;  ///< components without enough data
  bool zero_noise = false;             ///< some frame had an exact fit
};
SurrogateEstimate surrogate_mle(const TrackSet& tracks, const ImageStack& y,
                                const ModelParams& base);

/// Gaussian random-walk Metropolis-Hastings on each parameter component in turn, on log
/// scale for variances and rates, logit scale for the survival probability. Returns the
/// number of accepted component updates.
using ParamLogTarget = std::function<double(const ModelParams&)>;
int mh_update(ModelParams& params, const ParamLogTarget& log_target,
              const std::vector<double>& step_sizes, Rng& rng);

}  // namespace mtt
