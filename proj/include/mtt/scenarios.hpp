#pragma once

#include "mtt/model.hpp"

namespace mtt {

/// 64 x 64 pixels, 20 frames, five targets, two of which cross mid-sequence.
ModelParams crossing_scenario_params();
TrackSet crossing_scenario_tracks(const ModelParams& params);

/// Parameters deliberately far from the crossing scenario, used to start learning.
ModelParams perturbed_params(const ModelParams& truth);

}  // namespace mtt
