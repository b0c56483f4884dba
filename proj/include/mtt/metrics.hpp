#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtt/model.hpp"
#include "mtt/sampler.hpp"

namespace mtt {

struct OspaParams {
  double p = 1.0;
  double c = 10.0;
};

/// Minimum-cost assignment of rows to columns (rows <= cols). Returns the column of
/// each row.
std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost);

double ospa_distance(std::span<const Vec2> estimate, std::span<const Vec2> truth,
                     const OspaParams& params = {});

std::vector<Vec2> positions_at(const TrackSet& tracks, int t);

/// OSPA between two track sets for each frame, indexed t - 1.
std::vector<double> ospa_per_frame(const TrackSet& estimate, const TrackSet& truth, int frames,
                                   const OspaParams& params = {});

struct NearestNeighbourConfig {
  double threshold = 0.0;
  double gate = 5.0;
};

/// Baseline: matched-filter peaks linked greedily by nearest neighbour within a gate.
TrackSet greedy_nn_tracker(const ImageStack& y, const ModelParams& params,
                           const NearestNeighbourConfig& config);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long> counts;

  double mode() const;
  double bin_center(std::size_t i) const;
};
Histogram make_histogram(std::span<const double> values, int bins);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  Histogram hist;
};

struct ChainSummary {
  std::vector<long> iterations;
  std::vector<double> log_joint;
  std::vector<int> total_targets;
  std::vector<std::vector<int>> counts;  ///< per retained sample, per frame
  std::vector<ParamSummary> params;
  std::vector<double> ospa;              ///< mean per frame over retained samples
  double mean_ospa = 0.0;
  std::vector<int> count_mode;           ///< modal target count per frame
};

ChainSummary summarize_chain(std::span<const SampleRecord> samples, double burn_in_fraction,
                             const TrackSet* truth = nullptr, const OspaParams& ospa = {},
                             int bins = 30);

}  // namespace mtt
