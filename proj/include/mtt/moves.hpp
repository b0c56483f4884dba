#pragma once

#include <array>
#include <limits>
#include <span>
#include <string>

#include "mtt/birth.hpp"
#include "mtt/model.hpp"
#include "mtt/rng.hpp"

namespace mtt {

enum class MoveType : int { birth_death = 0, multi_step = 1, one_step = 2, state_swap = 3 };
constexpr std::size_t kMoveTypes = 4;
const char* move_name(MoveType type);

/// Current latent state together with its cached log joint density.
struct LatentState {
  TrackSet tracks;
  double log_joint = 0.0;
};

struct MoveContext {
  const ImageStack& y;
  const ModelParams& params;
  ProposalConfig proposal;
  FilterCache* cache = nullptr;
};

struct MoveOutcome {
  MoveType type = MoveType::birth_death;
  bool proposed = false;  ///< false for no-op selections
  bool accepted = false;
  double log_ratio = -std::numeric_limits<double>::infinity();
  double delta_log_joint = 0.0;
  TrackEdit edit;
};

struct AcceptanceStats {
  std::array<long, kMoveTypes> attempted{};
  std::array<long, kMoveTypes> accepted{};

  void record(const MoveOutcome& out);
  double rate(MoveType type) const;
};

using MoveProbabilities = std::array<double, kMoveTypes>;
constexpr MoveProbabilities kDefaultMoveProbabilities{0.25, 0.25, 0.25, 0.25};

/// The proposal part of each move. Each returns the edit and log acceptance ratio
/// without modifying the state; `proposed` is false when the move is a no-op.
MoveOutcome propose_birth_death(const LatentState& state, const MoveContext& ctx, Rng& rng);
MoveOutcome propose_multi_step(const LatentState& state, const MoveContext& ctx, Rng& rng);
MoveOutcome propose_one_step(const LatentState& state, const MoveContext& ctx, Rng& rng);
MoveOutcome propose_state_swap(const LatentState& state, const MoveContext& ctx, Rng& rng);

/// Proposes, accepts or rejects, and updates the state.
MoveOutcome apply_move(MoveType type, LatentState& state, const MoveContext& ctx, Rng& rng);

/// One sweep: a single move chosen with the given probabilities.
MoveOutcome sweep(LatentState& state, const MoveContext& ctx, Rng& rng,
                  const MoveProbabilities& probs = kDefaultMoveProbabilities,
                  AcceptanceStats* stats = nullptr);

/// Log probability that the swap move selects the unordered pair {a, b} at frame t
/// (a == b means a split).
double swap_selection_log_prob(const TrackSet& tracks, int frames, int t, std::size_t a,
                               std::size_t b);

/// Exact joint Gaussian posterior of the intensities of `affected` tracks given their
/// positions, the images and the other tracks.
Gaussian intensity_posterior(const TrackSet& others, std::span<const Track> affected,
                             const ImageStack& y, const ModelParams& params);

/// Log density of the refresh proposal (velocities and intensities) for `affected`.
double refresh_log_density(const TrackSet& others, std::span<const Track> affected,
                           const ImageStack& y, const ModelParams& params);
/// Redraws velocities and intensities of `affected` in place; returns the log density.
double refresh_sample(const TrackSet& others, std::span<Track> affected, const ImageStack& y,
                      const ModelParams& params, Rng& rng);

}  // namespace mtt
