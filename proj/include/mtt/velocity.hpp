#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mtt/params.hpp"
#include "mtt/rng.hpp"
#include "mtt/types.hpp"

namespace mtt {

/// Known full state adjacent to a run of positions.
struct VelocityAnchor {
  enum class Side { none, before, after };
  Side side = Side::none;
  TargetState state;

  static VelocityAnchor none() { return {}; }
  static VelocityAnchor before(const TargetState& x) { return {Side::before, x}; }
  static VelocityAnchor after(const TargetState& x) { return {Side::after, x}; }
};

/// Exact conditional of the velocities of a track segment given its positions, computed
/// per axis by forward filtering and backward sampling. Without an anchor the first
/// state follows the birth density; with an anchor before, it follows the transition
/// from the anchor; with an anchor after, the anchor is the transition of the last state.
class VelocityConditional {
 public:
  VelocityConditional(std::span<const Vec2> positions, const ModelParams& params,
                      const VelocityAnchor& anchor = VelocityAnchor::none());

  std::size_t size() const { return size_; }
  std::vector<Vec2> sample(Rng& rng) const;
  double log_density(std::span<const Vec2> velocities) const;
  std::vector<Vec2> mean() const;

 private:
  struct BackwardStep {
    double gain = 0.0;    // coefficient on the later velocity
    double offset = 0.0;  // constant term
    double var = 0.0;
  };
  struct Axis {
    std::vector<BackwardStep> steps;  // steps[j] gives v_j given v_{j+1} (last: marginal)
  };

  std::size_t size_ = 0;
  Axis axes_[2];
};

}  // namespace mtt
