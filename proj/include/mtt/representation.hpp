#pragma once

#include <cstdint>
#include <vector>

#include "mtt/params.hpp"
#include "mtt/types.hpp"

namespace mtt {

/// One frame of the multi-target sequence. `survival[j]` says whether target j of the
/// previous frame is still alive; survivors come first in the order of their previous
/// positions, followed by `births` newborn targets sorted by intensity.
struct MttFrame {
  std::vector<std::uint8_t> survival;
  int births = 0;
  std::vector<TargetState> states;
};

struct MttSequence {
  std::vector<MttFrame> frames;  ///< frame t at index t - 1

  int size() const { return static_cast<int>(frames.size()); }
  const MttFrame& frame(int t) const { return frames.at(static_cast<std::size_t>(t - 1)); }
};

/// Strict newborn ordering: intensity, then row position, then column position.
bool newborn_less(const TargetState& lhs, const TargetState& rhs);

/// Throws ConfigError when survival vectors or counts are inconsistent.
void validate_sequence(const MttSequence& seq);

/// Whether every frame's newborns are strictly increasing under newborn_less.
bool ordering_holds(const MttSequence& seq);

/// Sorts tracks by birth frame then initial state, and relabels them 1..K.
void canonicalize(TrackSet& tracks);

TrackSet tracks_from_mtt(const MttSequence& seq);
MttSequence mtt_from_tracks(const TrackSet& tracks, int frames);

/// Log joint density of a sequence; -inf when the newborn ordering is violated.
double log_joint(const MttSequence& seq, const ModelParams& params, const ImageStack& y);

}  // namespace mtt
