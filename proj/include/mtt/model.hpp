#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mtt/params.hpp"
#include "mtt/rng.hpp"
#include "mtt/types.hpp"

namespace mtt {

/// Inclusive pixel rectangle.
struct Window {
  int r0 = 0;
  int r1 = -1;
  int c0 = 0;
  int c1 = -1;

  bool contains(Pixel p) const { return p.row >= r0 && p.row <= r1 && p.col >= c0 && p.col <= c1; }
  bool empty() const { return r1 < r0 || c1 < c0; }
  Window clipped(int rows, int cols) const;
};

/// Pixel nearest to a spatial position.
Pixel nearest_pixel(const Vec2& s, double pitch);

/// Truncation square centred on the nearest pixel, clipped to the image.
Window truncation_square(const Vec2& s, const Geometry& geom);

/// Unit-intensity pixel-integrated Gaussian response, without truncation.
double psf_unit(const Vec2& s, int row, int col, const Geometry& geom);

/// Expected contribution of one target to one pixel, zero outside the truncation square.
double psf_value(const TargetState& x, Pixel p, const ModelParams& params);

/// Adds `scale` times the truncated response of `x` to `img`.
void add_target(Image& img, const TargetState& x, const Geometry& geom, double scale = 1.0);

/// Background plus the responses of all targets.
Image render_frame(std::span<const TargetState> targets, int t, const ModelParams& params);

/// States of all targets alive at frame t, in track order.
std::vector<TargetState> states_at(const TrackSet& tracks, int t);

/// Per-frame births, alive counts and survivals.
struct FrameCounts {
  std::vector<int> births;    ///< indexed t - 1
  std::vector<int> alive;     ///< indexed t - 1
  std::vector<int> survived;  ///< targets alive at both t - 1 and t
  std::vector<int> ended;     ///< targets alive at t - 1 and not at t (t >= 2)
};
FrameCounts frame_counts(const TrackSet& tracks, int frames);

/// log p(z) + log p(x | z) for the track set. Returns -inf when the per-frame cap is
/// exceeded. Throws ConfigError when a track extends beyond the frame range.
double log_prior(const TrackSet& tracks, const ModelParams& params);

double log_likelihood(const TrackSet& tracks, const ModelParams& params, const ImageStack& y);

double frame_log_likelihood(std::span<const TargetState> targets, int t, const ModelParams& params,
                            const Image& y);

double log_joint(const TrackSet& tracks, const ModelParams& params, const ImageStack& y);

/// Replacement of some tracks by others.
struct TrackEdit {
  std::vector<std::size_t> removed;  ///< indices into the current track set
  std::vector<Track> added;
};

TrackSet apply_edit(const TrackSet& tracks, const TrackEdit& edit);

/// Change in log-likelihood caused by `edit`, evaluated over affected pixels only.
double delta_log_likelihood(const TrackSet& tracks, const TrackEdit& edit,
                            const ModelParams& params, const ImageStack& y);

TrackSet sample_prior_tracks(const ModelParams& params, Rng& rng);
ImageStack sample_images(const TrackSet& tracks, const ModelParams& params, Rng& rng);
ImageStack render_images(const TrackSet& tracks, const ModelParams& params);

/// Peak signal-to-noise ratio in dB for intensity `a`.
double snr_db(double a, double noise_sd, const Geometry& geom);

}  // namespace mtt
