#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mtt/filtering.hpp"
#include "mtt/gaussian.hpp"
#include "mtt/model.hpp"
#include "mtt/rng.hpp"

namespace mtt {

/// Gaussian prior over intensity and position (a, s1, s2).
struct IntensityPositionPrior {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

IntensityPositionPrior birth_marginal(const ModelParams& params);

/// Second-order expansion of the single-target posterior around the filter peak.
struct LaplaceFit {
  bool valid = false;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d precision = Eigen::Matrix3d::Zero();
  double log_evidence = 0.0;  ///< approximate log p(residual | target present)
  double log_null = 0.0;      ///< log p(residual | no target)
  Gaussian proposal;
};

LaplaceFit laplace_fit(const ResidualFrame& res, Pixel peak, const IntensityPositionPrior& prior,
                       const ModelParams& params);

/// log of p(H1)/p(H0) * p(res | H1) / p(res | H0); -inf when the fit is invalid.
double log_test_ratio(const LaplaceFit& fit, double p_h1);
double test_ratio(const ResidualFrame& res, Pixel peak, double p_h1,
                  const IntensityPositionPrior& prior, const ModelParams& params);

/// Probability that more than `births` targets are born given the Poisson rate.
double birth_h1_probability(int births, double lambda);

enum class AcceptRule { min_one, logistic };

/// log of the acceptance probability of H1 for a given log test ratio.
double log_accept_probability(double log_rho, AcceptRule rule);

struct ProposalConfig {
  GammaRule gamma;
  AcceptRule accept = AcceptRule::min_one;
  int window_half_width = -1;  ///< -1 selects the default width
};

enum class StopReason { beyond_range, not_survive, empty_candidates, h1_rejected };

/// Candidate component of one construction step.
struct StepCandidate {
  Pixel peak;
  double log_weight = 0.0;  ///< log of (1/|G|) times the H1 acceptance probability
  LaplaceFit fit;
};

/// Sub-probability density of one construction step over (a, s1, s2).
struct StepDistribution {
  int t = 0;
  double log_survival = 0.0;  ///< 0 for the first step
  std::vector<StepCandidate> candidates;

  /// log of the total probability of placing a target at this step.
  double log_place_probability() const;
  double log_density(const Eigen::Vector3d& as) const;
};

struct StepRecord {
  int t = 0;
  Pixel peak;
  double log_rho = 0.0;
  double accept_probability = 0.0;
};

/// How a segment is attached to existing data.
enum class SegmentKind { birth, extend_forward, extend_backward };

struct SegmentRequest {
  SegmentKind kind = SegmentKind::birth;
  int start = 1;             ///< frame of the first constructed state
  TargetState anchor;        ///< adjacent state of the extended track
};

struct SegmentSample {
  std::vector<TargetState> states;  ///< in time order
  int first_frame = 0;
  double log_q = 0.0;
  std::vector<StepRecord> steps;  ///< in construction order
  StopReason stop = StopReason::beyond_range;
};

/// Sequential constructor of track segments from matched-filter peaks and local fits,
/// used for births and multi-step extensions. Residuals are taken with respect to the
/// supplied track set.
class SegmentProposer {
 public:
  SegmentProposer(const TrackSet& tracks, const ImageStack& y, const ModelParams& params,
                  const ProposalConfig& config, FilterCache* cache = nullptr);

  /// Returns nothing when the first step fails.
  std::optional<SegmentSample> sample(const SegmentRequest& req, Rng& rng);
  /// Log proposal density of a segment given in time order; -inf if unreachable.
  double log_density(const SegmentRequest& req, std::span<const TargetState> states);

  StepDistribution step_distribution(int t, const IntensityPositionPrior& prior,
                                     const std::optional<Vec2>& window_center, double p_h1,
                                     double log_survival);
  const ResidualFrame& residual(int t);
  int births_at(int t) const;

 private:
  IntensityPositionPrior step_prior(const SegmentRequest& req,
                                    std::span<const Eigen::Vector3d> built) const;
  double first_step_h1(const SegmentRequest& req) const;
  double log_velocity_density(const SegmentRequest& req, std::span<const TargetState> states) const;
  std::vector<Vec2> sample_velocities(const SegmentRequest& req, std::span<const Vec2> positions,
                                      Rng& rng) const;

  const TrackSet& tracks_;
  const ImageStack& y_;
  const ModelParams& params_;
  ProposalConfig config_;
  FilterCache* cache_;
  FilterCache own_cache_;
  std::vector<int> births_;
  std::map<int, ResidualFrame> residuals_;
};

/// Forward or backward predictive prior over (a, s) of the next constructed state.
IntensityPositionPrior segment_step_prior(const SegmentRequest& req,
                                          std::span<const Eigen::Vector3d> built,
                                          const ModelParams& params);

struct BirthSample {
  Track track;
  double log_q = 0.0;
  std::vector<StepRecord> steps;
  StopReason stop = StopReason::beyond_range;
};

/// Draws a new track given the current set. `fixed_birth` removes the uniform choice of
/// the birth frame. Returns nothing when the first step fails.
std::optional<BirthSample> sample_birth_track(const TrackSet& tracks, const ImageStack& y,
                                              const ModelParams& params, Rng& rng,
                                              std::optional<int> fixed_birth = std::nullopt,
                                              const ProposalConfig& config = {},
                                              FilterCache* cache = nullptr);

/// Log density with which sample_birth_track would produce `track` from `tracks`.
double birth_density(const Track& track, const TrackSet& tracks, const ImageStack& y,
                     const ModelParams& params, std::optional<int> fixed_birth = std::nullopt,
                     const ProposalConfig& config = {}, FilterCache* cache = nullptr);

}  // namespace mtt
