#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mtt/errors.hpp"
#include "mtt/gaussian.hpp"
#include "mtt/model.hpp"
#include "mtt/representation.hpp"
#include "stats.hpp"

using namespace mtt;
using namespace mtt::testing;

namespace {

ModelParams unit_geometry(int rows = 9, int cols = 9, int frames = 1) {
  return make_params(rows, cols, frames, unit_dynamics(), 0.8, 0.3, 0.0, 1.0);
}

}  // namespace

TEST(Psf, CentrePixelValue) {
  const ModelParams p = unit_geometry();
  EXPECT_NEAR(psf_value(state(30, 0, 0), {0, 0}, p), 30.0 / (2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(psf_value(state(30, 0, 0), {0, 0}, p), 4.77465, 1e-5);
}

TEST(Psf, NeighbourPixelValue) {
  const ModelParams p = unit_geometry();
  EXPECT_NEAR(psf_value(state(30, 0, 0), {1, 0}, p), 30.0 / (2.0 * std::numbers::pi) * std::exp(-0.5), 1e-12);
}

TEST(Psf, ZeroOutsideTruncationSquare) {
  const ModelParams p = unit_geometry();
  ASSERT_EQ(p.geom.trunc, 5);
  const TargetState x = state(30, 4.2, 4.4);
  EXPECT_GT(psf_value(x, {6, 6}, p), 0.0);
  EXPECT_EQ(psf_value(x, {7, 4}, p), 0.0);
  EXPECT_EQ(psf_value(x, {4, 1}, p), 0.0);
}

TEST(Psf, NonNegativeEverywhere) {
  const ModelParams p = unit_geometry();
  const TargetState x = state(12, 3.3, 5.7);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) EXPECT_GE(psf_value(x, {r, c}, p), 0.0);
}

TEST(Psf, DefaultTruncationKeepsMostMass) {
  for (double sigma : {0.7, 1.0, 1.5, 2.0}) {
    Geometry g;
    g.rows = g.cols = 41;
    g.psf_sigma = sigma;
    g.trunc = default_truncation(sigma, 1.0);
    EXPECT_EQ(g.trunc % 2, 1);
    const Vec2 s(20.0, 20.0);
    const Window w = truncation_square(s, g);
    double mass = 0.0;
    for (int r = w.r0; r <= w.r1; ++r)
      for (int c = w.c0; c <= w.c1; ++c) mass += psf_unit(s, r, c, g);
    // Midpoint rule for the Gaussian mass over the square of pixel cells.
    const double half = (g.trunc / 2 + 0.5) / (sigma * std::sqrt(2.0));
    EXPECT_NEAR(mass, std::pow(std::erf(half), 2), 0.01) << "sigma " << sigma;
    EXPECT_GT(mass, 0.95) << "sigma " << sigma;
  }
}

TEST(Render, ZeroTargetsGiveBackground) {
  ModelParams p = unit_geometry();
  p.background[0] = 5.0;
  const Image img = render_frame({}, 1, p);
  EXPECT_TRUE((img.array() == 5.0).all());
}

TEST(Render, SuperpositionIsLinear) {
  const ModelParams p = unit_geometry();
  const std::vector<TargetState> two{state(15, 4.2, 3.9), state(15, 4.2, 3.9)};
  const std::vector<TargetState> one{state(30, 4.2, 3.9)};
  EXPECT_LT((render_frame(two, 1, p) - render_frame(one, 1, p)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Render, SingleTargetMatchesPsfField) {
  const ModelParams p = unit_geometry();
  const TargetState x = state(30, 4, 4);
  const std::vector<TargetState> one{x};
  const Image img = render_frame(one, 1, p);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) EXPECT_DOUBLE_EQ(img(r, c), psf_value(x, {r, c}, p));
}

TEST(Snr, ReferenceIntensity) {
  Geometry g;
  EXPECT_NEAR(snr_db(30.0, 1.0, g), 13.6, 0.05);
}

TEST(Snr, ZeroDecibelsAtUnitRatio) {
  Geometry g;
  EXPECT_NEAR(snr_db(2.0 * std::numbers::pi, 1.0, g), 0.0, 1e-12);
}

TEST(Snr, DoublingAddsSixDecibels) {
  Geometry g;
  EXPECT_NEAR(snr_db(60.0, 1.0, g) - snr_db(30.0, 1.0, g), 6.0206, 1e-4);
}

TEST(Snr, RejectsNonPositiveInputs) {
  Geometry g;
  EXPECT_THROW(snr_db(0.0, 1.0, g), ConfigError);
  EXPECT_THROW(snr_db(1.0, -1.0, g), ConfigError);
}

TEST(Params, ValidationRejectsBadValues) {
  ModelParams p = small_params();
  EXPECT_NO_THROW(p.validate());
  ModelParams q = p;
  q.dyn.var_x = 0.0;
  EXPECT_THROW(q.validate(), ConfigError);
  q = p;
  q.p_s = 1.5;
  EXPECT_THROW(q.validate(), ConfigError);
  q = p;
  q.lambda_b = -0.1;
  EXPECT_THROW(q.validate(), ConfigError);
  q = p;
  q.geom.trunc = 4;
  EXPECT_THROW(q.validate(), ConfigError);
  q = p;
  q.noise_var.pop_back();
  EXPECT_THROW(q.validate(), ConfigError);
}

TEST(Params, VectorRoundTrip) {
  ModelParams p = small_params();
  p.background = {1, 2, 3, 4};
  p.noise_var = {0.5, 0.6, 0.7, 0.8};
  const auto v = param_vector(p);
  EXPECT_EQ(v.size(), param_names(p.frames).size());
  ModelParams q = small_params();
  assign_param_vector(q, v);
  EXPECT_EQ(param_vector(q), v);
}

TEST(PriorSampling, ZeroBirthRateGivesNoTracks) {
  ModelParams p = small_params();
  p.lambda_b = 0.0;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(sample_prior_tracks(p, rng).empty());
}

TEST(PriorSampling, ZeroSurvivalGivesSingleFrameTracks) {
  ModelParams p = small_params();
  p.p_s = 0.0;
  p.lambda_b = 2.0;
  Rng rng(4);
  for (int i = 0; i < 100; ++i)
    for (const auto& tr : sample_prior_tracks(p, rng)) EXPECT_EQ(tr.length(), 1);
}

TEST(PriorSampling, MeanBirthCountMatchesPoisson) {
  ModelParams p = make_params(4, 4, 50, unit_dynamics(), 0.5, 0.3, 0.0, 1.0);
  Rng rng(5);
  const int reps = 10000;
  std::vector<double> totals;
  for (int i = 0; i < reps; ++i) totals.push_back(static_cast<double>(sample_prior_tracks(p, rng).size()));
  const double se = std::sqrt(15.0 / reps);
  EXPECT_NEAR(mean(totals), 15.0, 3.0 * se);
}

TEST(PriorSampling, OutputSatisfiesInvariants) {
  ModelParams p = small_params(16, 16, 6);
  p.lambda_b = 1.5;
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const TrackSet tracks = sample_prior_tracks(p, rng);
    for (const auto& tr : tracks) {
      EXPECT_GE(tr.birth, 1);
      EXPECT_GE(tr.length(), 1);
      EXPECT_LE(tr.last(), p.frames);
    }
    const MttSequence seq = mtt_from_tracks(tracks, p.frames);
    EXPECT_NO_THROW(validate_sequence(seq));
    EXPECT_TRUE(ordering_holds(seq));
  }
}

TEST(ImageSampling, TinyNoiseReproducesRender) {
  ModelParams p = small_params();
  for (auto& v : p.noise_var) v = 1e-30;
  const TrackSet tracks{line_track(1, 4, state(20, 5, 6, 1, 0.5))};
  Rng rng(7);
  const ImageStack y = sample_images(tracks, p, rng);
  const ImageStack r = render_images(tracks, p);
  for (int t = 1; t <= p.frames; ++t) EXPECT_LT((y.frame(t) - r.frame(t)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ImageSampling, SameSeedIsBitIdentical) {
  const ModelParams p = small_params();
  const TrackSet tracks{line_track(1, 4, state(20, 5, 6, 1, 0.5))};
  Rng a(8), b(8);
  const ImageStack ya = sample_images(tracks, p, a);
  const ImageStack yb = sample_images(tracks, p, b);
  for (int t = 1; t <= p.frames; ++t) EXPECT_TRUE((ya.frame(t).array() == yb.frame(t).array()).all());
}

TEST(ImageSampling, NoiseVarianceMatches) {
  const ModelParams p = make_params(100, 100, 10, unit_dynamics(), 0.5, 0.3, 0.0, 1.0);
  Rng rng(9);
  const ImageStack y = sample_images({}, p, rng);
  std::vector<double> all;
  for (int t = 1; t <= p.frames; ++t)
    for (Eigen::Index i = 0; i < y.frame(t).size(); ++i) all.push_back(y.frame(t).data()[i]);
  const double v = variance(all);
  EXPECT_GE(v, 0.99);
  EXPECT_LE(v, 1.01);
}

TEST(LogJoint, EmptySetClosedForm) {
  const ModelParams p = small_params();
  Rng rng(10);
  const ImageStack y = sample_images({}, p, rng);
  double expected = 0.0;
  for (int t = 1; t <= p.frames; ++t) {
    expected -= p.lambda_b;
    const Image& f = y.frame(t);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double e = f.data()[i] - p.background_at(t);
      expected += -0.5 * std::log(2.0 * std::numbers::pi * p.noise_var_at(t)) - e * e / (2.0 * p.noise_var_at(t));
    }
  }
  EXPECT_NEAR(log_joint(TrackSet{}, p, y), expected, 1e-9 * std::abs(expected));
}

TEST(LogJoint, SingleTargetMatchesHandComposition) {
  // One frame, 2 x 2 pixels, one target at each of three candidate states.
  ModelParams p = make_params(2, 2, 1, unit_dynamics(), 0.8, 0.4, 1.0, 0.5);
  p.geom.trunc = 3;
  ImageStack y(1, 2, 2);
  y.frame(1) << 1.3, 2.1, 0.7, 1.9;
  const std::vector<TargetState> grid{state(18, 0, 0, 0.5, -0.2), state(21, 0.5, 1, 0, 0), state(23, 1, 0.5, -1, 1)};
  for (const auto& x : grid) {
    Track tr;
    tr.birth = 1;
    tr.states = {x};
    const auto& d = p.dyn;
    double expected = std::log(p.lambda_b) - p.lambda_b;
    expected += log_normal_pdf(x.a, d.mu_bi, d.var_bi) + log_normal_pdf(x.s(0), d.mu_bx, d.var_bp) +
                log_normal_pdf(x.s(1), d.mu_by, d.var_bp) + log_normal_pdf(x.v(0), 0.0, d.var_bv) +
                log_normal_pdf(x.v(1), 0.0, d.var_bv);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        expected += log_normal_pdf(y.frame(1)(r, c), 1.0 + psf_value(x, {r, c}, p), 0.5);
    EXPECT_NEAR(log_joint(TrackSet{tr}, p, y), expected, 1e-10);
  }
}

TEST(LogJoint, IncrementalMatchesFull) {
  ModelParams p = small_params(24, 24, 5);
  Rng rng(11);
  const TrackSet tracks{line_track(1, 5, state(20, 5, 6, 1, 0.5)), line_track(2, 3, state(18, 15, 12, -1, 1))};
  const ImageStack y = sample_images(tracks, p, rng);
  const TrackEdit edits[] = {
      {{0}, {}},
      {{}, {line_track(3, 2, state(25, 10, 10, 0, 0))}},
      {{1}, {line_track(2, 4, state(18, 15.3, 12.2, -1, 1))}},
      {{0, 1}, {line_track(1, 1, state(19, 3, 3, 0, 0))}},
  };
  const double before = log_likelihood(tracks, p, y);
  for (const auto& e : edits) {
    const double full = log_likelihood(apply_edit(tracks, e), p, y) - before;
    const double inc = delta_log_likelihood(tracks, e, p, y);
    EXPECT_NEAR(inc, full, 1e-9 * std::abs(before));
  }
}

TEST(LogJoint, CapMakesDensityZero) {
  ModelParams p = small_params();
  p.max_targets_per_frame = 1;
  const TrackSet tracks{line_track(1, 1, state(20, 5, 5)), line_track(1, 1, state(21, 9, 9))};
  EXPECT_EQ(log_prior(tracks, p), -std::numeric_limits<double>::infinity());
}

TEST(LogJoint, TrackBeyondRangeIsAnError) {
  const ModelParams p = small_params();
  const TrackSet tracks{line_track(3, 4, state(20, 5, 5))};
  EXPECT_THROW(log_prior(tracks, p), ConfigError);
}

TEST(LogJoint, DimensionMismatchIsAnError) {
  const ModelParams p = small_params();
  const ImageStack y(4, 10, 16);
  EXPECT_THROW(log_joint(TrackSet{}, p, y), Error);
}

TEST(FrameCounts, CountsBirthsSurvivalsAndEnds) {
  const TrackSet tracks{line_track(1, 3, state(20, 1, 1)), line_track(2, 1, state(20, 5, 5))};
  const FrameCounts fc = frame_counts(tracks, 4);
  EXPECT_EQ(fc.births, (std::vector<int>{1, 1, 0, 0}));
  EXPECT_EQ(fc.alive, (std::vector<int>{1, 2, 1, 0}));
  EXPECT_EQ(fc.survived, (std::vector<int>{0, 1, 1, 0}));
  EXPECT_EQ(fc.ended, (std::vector<int>{0, 0, 1, 1}));
}
