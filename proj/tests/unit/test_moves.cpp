#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mtt/moves.hpp"
#include "mtt/representation.hpp"
#include "stats.hpp"
#include "toy.hpp"

using namespace mtt;
using namespace mtt::testing;

namespace {

struct ToyData {
  ToyModel toy;
  ImageStack y;
  std::vector<double> posterior;
};

ToyData toy_data() {
  ToyData d;
  d.toy = make_toy();
  Rng rng(11);
  const ImageStack blank(d.toy.params.frames, d.toy.params.geom.rows, d.toy.params.geom.cols);
  int cls = -1;
  for (std::size_t c = 0; c < d.toy.classes.size(); ++c)
    if (d.toy.classes[c] == std::vector<int>{1, 1, 0}) cls = static_cast<int>(c);
  TrackSet truth = sample_toy_tracks(d.toy, blank, cls, rng);
  for (auto& tr : truth)
    for (auto& x : tr.states) x.a = 6.0;
  d.y = sample_images(truth, d.toy.params, rng);
  d.posterior = toy_posterior(d.toy, d.y);
  return d;
}

const ToyData& shared_toy() {
  static const ToyData d = toy_data();
  return d;
}

// One move of `type` from exact posterior draws. Returns the class counts after the move and
// the class transition counts.
struct MoveStats {
  std::vector<long> after;
  std::map<std::pair<int, int>, long> transitions;
  long accepted = 0;
};

MoveStats run_from_posterior(MoveType type, int draws, std::uint64_t seed) {
  const ToyData& d = shared_toy();
  Rng rng(seed);
  FilterCache cache;
  const MoveContext ctx{d.y, d.toy.params, ProposalConfig{}, &cache};
  MoveStats st;
  st.after.assign(d.posterior.size(), 0);
  for (int i = 0; i < draws; ++i) {
    TrackSet tracks = sample_toy_posterior(d.toy, d.y, d.posterior, rng);
    LatentState s{tracks, log_joint(tracks, d.toy.params, d.y)};
    const int before = class_index(d.toy, s.tracks);
    const MoveOutcome out = apply_move(type, s, ctx, rng);
    if (out.accepted) ++st.accepted;
    const int after = class_index(d.toy, s.tracks);
    EXPECT_GE(after, 0);
    if (after < 0) continue;
    st.after[static_cast<std::size_t>(after)]++;
    if (before != after) st.transitions[{before, after}]++;
  }
  return st;
}

// Detailed balance: under the stationary law, c -> c' and c' -> c transitions occur equally often.
double symmetry_pvalue(const std::map<std::pair<int, int>, long>& tr) {
  double stat = 0.0;
  int dof = 0;
  for (const auto& [key, n] : tr) {
    if (key.first > key.second) continue;
    const auto it = tr.find({key.second, key.first});
    const long m = it == tr.end() ? 0 : it->second;
    if (n + m == 0) continue;
    stat += static_cast<double>((n - m) * (n - m)) / static_cast<double>(n + m);
    ++dof;
  }
  for (const auto& [key, n] : tr)
    if (key.first > key.second && !tr.contains({key.second, key.first})) {
      stat += static_cast<double>(n);
      ++dof;
    }
  return dof == 0 ? 1.0 : chi_square_pvalue(stat, dof);
}

void check_family(MoveType type, std::uint64_t seed) {
  const int draws = 40000;
  const MoveStats st = run_from_posterior(type, draws, seed);
  EXPECT_GT(st.accepted, 0) << move_name(type);
  EXPECT_GT(chi_square_gof_pvalue(st.after, shared_toy().posterior), 0.01) << move_name(type);
  EXPECT_GT(symmetry_pvalue(st.transitions), 0.01) << move_name(type);
}

}  // namespace

TEST(MovesToy, BirthDeathPreservesPosterior) { check_family(MoveType::birth_death, 101); }
TEST(MovesToy, MultiStepPreservesPosterior) { check_family(MoveType::multi_step, 102); }
TEST(MovesToy, OneStepPreservesPosterior) { check_family(MoveType::one_step, 103); }
TEST(MovesToy, StateSwapPreservesPosterior) { check_family(MoveType::state_swap, 104); }

TEST(Moves, DeathOnEmptyStateIsNoOp) {
  const ToyData& d = shared_toy();
  const MoveContext ctx{d.y, d.toy.params, ProposalConfig{}, nullptr};
  LatentState s{{}, log_joint(TrackSet{}, d.toy.params, d.y)};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const MoveOutcome out = propose_birth_death(s, ctx, rng);
    // Nothing can be removed; a birth attempt either carries one track or is rejected outright.
    EXPECT_TRUE(out.edit.removed.empty());
    if (out.edit.added.empty()) EXPECT_EQ(out.log_ratio, -std::numeric_limits<double>::infinity());
    else EXPECT_EQ(out.edit.added.size(), 1u);
  }
}

TEST(Moves, BirthAndDeathRatiosAreReciprocal) {
  const ModelParams p = make_params(16, 16, 3, unit_dynamics(), 0.8, 0.3, 0.0, 1.0);
  Rng data(105);
  const ImageStack y = sample_images({line_track(1, 3, state(22, 8, 8, 0.5, 0.3))}, p, data);
  const MoveContext ctx{y, p, ProposalConfig{}, nullptr};
  const LatentState empty{{}, log_joint(TrackSet{}, p, y)};
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 400 && checked < 5; ++seed) {
    Rng rng(seed);
    const MoveOutcome birth = propose_birth_death(empty, ctx, rng);
    if (!birth.proposed || birth.edit.added.size() != 1) continue;
    TrackSet born = apply_edit(empty.tracks, birth.edit);
    canonicalize(born);
    const LatentState full{born, log_joint(born, p, y)};
    for (std::uint64_t s2 = 0; s2 < 100; ++s2) {
      Rng r2(s2);
      const MoveOutcome death = propose_birth_death(full, ctx, r2);
      if (!death.proposed || death.edit.removed.size() != 1 || !death.edit.added.empty()) continue;
      EXPECT_NEAR(birth.log_ratio + death.log_ratio, 0.0, 1e-8);
      ++checked;
      break;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(Moves, ExtensionIsNoOpWhenTracksSpanAllFrames) {
  const ModelParams p = make_params(16, 16, 3, unit_dynamics(), 0.8, 0.3, 0.0, 1.0);
  Rng data(106);
  const TrackSet tracks{line_track(1, 3, state(22, 8, 8, 0.5, 0.3))};
  const ImageStack y = sample_images(tracks, p, data);
  const MoveContext ctx{y, p, ProposalConfig{}, nullptr};
  const LatentState s{tracks, log_joint(tracks, p, y)};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    for (const MoveOutcome& out : {propose_multi_step(s, ctx, rng), propose_one_step(s, ctx, rng)})
      if (out.proposed)
        for (const auto& tr : out.edit.added) EXPECT_LT(tr.length(), 3);
  }
}

TEST(Moves, ReductionIsNoOpForSingleFrameTracks) {
  const ModelParams p = make_params(16, 16, 3, unit_dynamics(), 0.8, 0.3, 0.0, 1.0);
  Rng data(107);
  const TrackSet tracks{line_track(2, 1, state(22, 8, 8, 0.5, 0.3))};
  const ImageStack y = sample_images(tracks, p, data);
  const MoveContext ctx{y, p, ProposalConfig{}, nullptr};
  const LatentState s{tracks, log_joint(tracks, p, y)};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    for (const MoveOutcome& out : {propose_multi_step(s, ctx, rng), propose_one_step(s, ctx, rng)})
      if (out.proposed)
        for (const auto& tr : out.edit.added) EXPECT_GT(tr.length(), 1);
  }
}

TEST(Moves, SwapNeedsTwoFrames) {
  const ModelParams p = make_params(16, 16, 1, unit_dynamics(), 0.8, 0.3, 0.0, 1.0);
  const TrackSet tracks{line_track(1, 1, state(22, 8, 8)), line_track(1, 1, state(21, 4, 4))};
  Rng data(108);
  const ImageStack y = sample_images(tracks, p, data);
  const MoveContext ctx{y, p, ProposalConfig{}, nullptr};
  const LatentState s{tracks, log_joint(tracks, p, y)};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) EXPECT_FALSE(propose_state_swap(s, ctx, rng).proposed);
}

TEST(Moves, SweepRespectsMoveProbabilities) {
  const ToyData& d = shared_toy();
  FilterCache cache;
  const MoveContext ctx{d.y, d.toy.params, ProposalConfig{}, &cache};
  LatentState s{{}, log_joint(TrackSet{}, d.toy.params, d.y)};
  Rng rng(109);
  for (int i = 0; i < 2000; ++i)
    EXPECT_EQ(sweep(s, ctx, rng, MoveProbabilities{1, 0, 0, 0}).type, MoveType::birth_death);

  AcceptanceStats stats;
  std::array<long, kMoveTypes> seen{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) seen[static_cast<std::size_t>(sweep(s, ctx, rng, kDefaultMoveProbabilities, &stats).type)]++;
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (long c : seen) EXPECT_NEAR(static_cast<double>(c), n * 0.25, 3.0 * sd);
}

TEST(Moves, CachedLogJointTracksFullEvaluation) {
  const ModelParams p = make_params(20, 20, 4, unit_dynamics(), 0.8, 0.3, 0.0, 1.0);
  Rng data(110);
  const TrackSet truth{line_track(1, 4, state(22, 6, 6, 1, 0.5)), line_track(2, 3, state(20, 14, 12, -0.5, 1))};
  const ImageStack y = sample_images(truth, p, data);
  FilterCache cache;
  const MoveContext ctx{y, p, ProposalConfig{}, &cache};
  LatentState s{{}, log_joint(TrackSet{}, p, y)};
  Rng rng(111);
  AcceptanceStats stats;
  long accepted = 0;
  for (int i = 0; i < 3000; ++i) {
    const double before = s.log_joint;
    const MoveOutcome out = sweep(s, ctx, rng, kDefaultMoveProbabilities, &stats);
    if (out.accepted) {
      ++accepted;
      const double full = log_joint(s.tracks, p, y);
      ASSERT_NEAR(s.log_joint, full, 1e-9 * std::abs(full));
      EXPECT_NO_THROW(validate_sequence(mtt_from_tracks(s.tracks, p.frames)));
    } else {
      EXPECT_EQ(s.log_joint, before);
    }
  }
  long counted = 0;
  for (long a : stats.accepted) counted += a;
  EXPECT_EQ(counted, accepted);
  EXPECT_GT(accepted, 0);
}

TEST(Moves, IntensityPosteriorMatchesScalarConjugate) {
  const ModelParams p = make_params(12, 12, 1, unit_dynamics(), 0.8, 0.3, 1.5, 0.7);
  Rng data(112);
  const Track tr = line_track(1, 1, state(20, 5.3, 6.1));
  const ImageStack y = sample_images({tr}, p, data);
  const Track affected[] = {tr};
  const Gaussian g = intensity_posterior({}, affected, y, p);
  double hh = 0.0, hy = 0.0;
  const Window w = truncation_square(tr.states[0].s, p.geom);
  for (int r = w.r0; r <= w.r1; ++r)
    for (int c = w.c0; c <= w.c1; ++c) {
      const double h = psf_unit(tr.states[0].s, r, c, p.geom);
      hh += h * h;
      hy += h * (y.frame(1)(r, c) - 1.5);
    }
  const double prec = 1.0 / p.dyn.var_bi + hh / 0.7;
  const double mean = (p.dyn.mu_bi / p.dyn.var_bi + hy / 0.7) / prec;
  EXPECT_NEAR(g.mean()(0), mean, 1e-8);
  EXPECT_NEAR(g.covariance()(0, 0), 1.0 / prec, 1e-8);
}

TEST(Moves, SwapSelectionProbabilitiesAreNormalised) {
  const TrackSet tracks{line_track(1, 3, state(22, 6, 6, 1, 0)), line_track(1, 3, state(21, 8, 9, 0, 1)),
                        line_track(2, 2, state(20, 3, 12, 0, -1))};
  for (int t = 1; t <= 2; ++t) {
    std::vector<double> logs;
    for (std::size_t a = 0; a < tracks.size(); ++a)
      for (std::size_t b = a; b < tracks.size(); ++b) {
        const double lp = swap_selection_log_prob(tracks, 3, t, a, b);
        if (std::isfinite(lp)) logs.push_back(lp);
      }
    ASSERT_FALSE(logs.empty());
    EXPECT_LE(std::exp(log_sum_exp(logs)), 1.0 + 1e-9);
  }
}
