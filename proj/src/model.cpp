#include "mtt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mtt/dynamics.hpp"
#include "mtt/errors.hpp"
#include "mtt/representation.hpp"

namespace mtt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_images(const ImageStack& y, const ModelParams& params) {
  if (y.frames() != params.frames || y.rows() != params.geom.rows || y.cols() != params.geom.cols) {
    std::ostringstream os;
    os << "image stack is " << y.frames() << "x" << y.rows() << "x" << y.cols()
       << " but parameters describe " << params.frames << "x" << params.geom.rows << "x"
       << params.geom.cols;
    throw FormatError(FormatErrorKind::dimension_mismatch, os.str());
  }
}

void check_track_range(const TrackSet& tracks, int frames) {
  for (const auto& tr : tracks) {
    if (tr.states.empty() || tr.birth < 1 || tr.last() > frames) {
      std::ostringstream os;
      os << "track " << tr.label << " spans frames " << tr.birth << ".." << tr.last()
         << " outside 1.." << frames;
      throw ConfigError(os.str());
    }
  }
}

// x log p with 0 log 0 = 0.
double xlogp(double x, double p) {
  if (x == 0.0) return 0.0;
  if (p <= 0.0) return kNegInf;
  return x * std::log(p);
}

double pixel_log_pdf(double y, double mean, double var) {
  double d = y - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

}  // namespace

Window Window::clipped(int rows, int cols) const {
  return {std::max(r0, 0), std::min(r1, rows - 1), std::max(c0, 0), std::min(c1, cols - 1)};
}

Pixel nearest_pixel(const Vec2& s, double pitch) {
  return {static_cast<int>(std::floor(s(0) / pitch + 0.5)),
          static_cast<int>(std::floor(s(1) / pitch + 0.5))};
}

Window truncation_square(const Vec2& s, const Geometry& geom) {
  if (!std::isfinite(s(0)) || !std::isfinite(s(1))) return Window{};
  // Far-away positions give an empty window without integer overflow.
  const double limit = 1e6;
  if (std::abs(s(0) / geom.pitch) > limit || std::abs(s(1) / geom.pitch) > limit) return Window{};
  Pixel c = nearest_pixel(s, geom.pitch);
  int h = geom.trunc / 2;
  return Window{c.row - h, c.row + h, c.col - h, c.col + h}.clipped(geom.rows, geom.cols);
}

double psf_unit(const Vec2& s, int row, int col, const Geometry& geom) {
  const double var = geom.psf_sigma * geom.psf_sigma;
  const double dr = geom.pitch * row - s(0);
  const double dc = geom.pitch * col - s(1);
  return geom.pitch * geom.pitch / (2.0 * std::numbers::pi * var) *
         std::exp(-(dr * dr + dc * dc) / (2.0 * var));
}

double psf_value(const TargetState& x, Pixel p, const ModelParams& params) {
  if (!truncation_square(x.s, params.geom).contains(p)) return 0.0;
  return x.a * psf_unit(x.s, p.row, p.col, params.geom);
}

void add_target(Image& img, const TargetState& x, const Geometry& geom, double scale) {
  Window w = truncation_square(x.s, geom);
  for (int r = w.r0; r <= w.r1; ++r)
    for (int c = w.c0; c <= w.c1; ++c) img(r, c) += scale * x.a * psf_unit(x.s, r, c, geom);
}

Image render_frame(std::span<const TargetState> targets, int t, const ModelParams& params) {
  Image img = Image::Constant(params.geom.rows, params.geom.cols, params.background_at(t));
  for (const auto& x : targets) add_target(img, x, params.geom);
  return img;
}

std::vector<TargetState> states_at(const TrackSet& tracks, int t) {
  std::vector<TargetState> out;
  for (const auto& tr : tracks)
    if (tr.alive_at(t)) out.push_back(tr.at(t));
  return out;
}

FrameCounts frame_counts(const TrackSet& tracks, int frames) {
  FrameCounts fc;
  const std::size_t n = static_cast<std::size_t>(frames);
  fc.births.assign(n, 0);
  fc.alive.assign(n, 0);
  fc.survived.assign(n, 0);
  fc.ended.assign(n, 0);
  for (const auto& tr : tracks) {
    fc.births[static_cast<std::size_t>(tr.birth - 1)]++;
    for (int t = tr.birth; t <= tr.last(); ++t) {
      fc.alive[static_cast<std::size_t>(t - 1)]++;
      if (t > tr.birth) fc.survived[static_cast<std::size_t>(t - 1)]++;
    }
    if (tr.last() < frames) fc.ended[static_cast<std::size_t>(tr.last())]++;
  }
  return fc;
}

double log_prior(const TrackSet& tracks, const ModelParams& params) {
  check_track_range(tracks, params.frames);
  FrameCounts fc = frame_counts(tracks, params.frames);
  if (params.max_targets_per_frame > 0) {
    for (int k : fc.alive)
      if (k > params.max_targets_per_frame) return kNegInf;
  }
  double lp = 0.0;
  for (int k : fc.births) lp += xlogp(k, params.lambda_b) - params.lambda_b;
  if (!std::isfinite(lp)) return kNegInf;
  MotionModel model(params);
  for (const auto& tr : tracks) {
    lp += xlogp(tr.length() - 1, params.p_s);
    if (tr.last() < params.frames) lp += xlogp(1.0, 1.0 - params.p_s);
    if (!std::isfinite(lp)) return kNegInf;
    lp += model.log_initial(tr.states.front());
    for (std::size_t j = 1; j < tr.states.size(); ++j)
      lp += model.log_transition(tr.states[j], tr.states[j - 1]);
  }
  return lp;
}

double frame_log_likelihood(std::span<const TargetState> targets, int t, const ModelParams& params,
                            const Image& y) {
  Image mean = render_frame(targets, t, params);
  const double var = params.noise_var_at(t);
  const double d2 = (y - mean).squaredNorm();
  const double count = static_cast<double>(y.size());
  return -0.5 * (count * (kLog2Pi + std::log(var)) + d2 / var);
}

double log_likelihood(const TrackSet& tracks, const ModelParams& params, const ImageStack& y) {
  check_images(y, params);
  check_track_range(tracks, params.frames);
  double ll = 0.0;
  for (int t = 1; t <= params.frames; ++t) {
    auto xs = states_at(tracks, t);
    ll += frame_log_likelihood(xs, t, params, y.frame(t));
  }
  return ll;
}

double log_joint(const TrackSet& tracks, const ModelParams& params, const ImageStack& y) {
  double lp = log_prior(tracks, params);
  if (lp == kNegInf) {
    check_images(y, params);
    return kNegInf;
  }
  return lp + log_likelihood(tracks, params, y);
}

TrackSet apply_edit(const TrackSet& tracks, const TrackEdit& edit) {
  TrackSet out;
  out.reserve(tracks.size() + edit.added.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (std::find(edit.removed.begin(), edit.removed.end(), i) == edit.removed.end())
      out.push_back(tracks[i]);
  }
  for (const auto& tr : edit.added) out.push_back(tr);
  canonicalize(out);
  return out;
}

double delta_log_likelihood(const TrackSet& tracks, const TrackEdit& edit,
                            const ModelParams& params, const ImageStack& y) {
  const Geometry& g = params.geom;
  std::vector<bool> removed(tracks.size(), false);
  for (std::size_t i : edit.removed) removed.at(i) = true;

  int t_lo = params.frames + 1;
  int t_hi = 0;
  auto widen = [&](const Track& tr) {
    t_lo = std::min(t_lo, tr.birth);
    t_hi = std::max(t_hi, tr.last());
  };
  for (std::size_t i : edit.removed) widen(tracks[i]);
  for (const auto& tr : edit.added) widen(tr);

  double delta = 0.0;
  std::vector<char> mask(static_cast<std::size_t>(g.rows * g.cols));
  std::vector<Pixel> pixels;
  std::vector<const TargetState*> kept, gone, fresh;
  for (int t = t_lo; t <= t_hi; ++t) {
    kept.clear();
    gone.clear();
    fresh.clear();
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (!tracks[i].alive_at(t)) continue;
      (removed[i] ? gone : kept).push_back(&tracks[i].at(t));
    }
    for (const auto& tr : edit.added)
      if (tr.alive_at(t)) fresh.push_back(&tr.at(t));
    if (gone.empty() && fresh.empty()) continue;

    std::fill(mask.begin(), mask.end(), 0);
    pixels.clear();
    auto mark = [&](const TargetState* x) {
      Window w = truncation_square(x->s, g);
      for (int r = w.r0; r <= w.r1; ++r)
        for (int c = w.c0; c <= w.c1; ++c) {
          char& m = mask[static_cast<std::size_t>(r * g.cols + c)];
          if (!m) {
            m = 1;
            pixels.push_back({r, c});
          }
        }
    };
    for (auto* x : gone) mark(x);
    for (auto* x : fresh) mark(x);

    const double b = params.background_at(t);
    const double var = params.noise_var_at(t);
    const Image& yt = y.frame(t);
    double acc = 0.0;
    for (Pixel p : pixels) {
      double base = b;
      for (auto* x : kept) base += psf_value(*x, p, params);
      double old_mean = base;
      for (auto* x : gone) old_mean += psf_value(*x, p, params);
      double new_mean = base;
      for (auto* x : fresh) new_mean += psf_value(*x, p, params);
      double yo = yt(p.row, p.col);
      acc += pixel_log_pdf(yo, new_mean, var) - pixel_log_pdf(yo, old_mean, var);
    }
    delta += acc;
  }
  return delta;
}

TrackSet sample_prior_tracks(const ModelParams& params, Rng& rng) {
  MotionModel model(params);
  for (;;) {
    TrackSet tracks;
    std::vector<std::size_t> active;
    for (int t = 1; t <= params.frames; ++t) {
      std::vector<std::size_t> next;
      for (std::size_t i : active) {
        if (uniform01(rng) < params.p_s) {
          auto& tr = tracks[i];
          tr.states.push_back(model.sample_transition(tr.states.back(), rng));
          next.push_back(i);
        }
      }
      int kb = sample_poisson(rng, params.lambda_b);
      for (int j = 0; j < kb; ++j) {
        Track tr;
        tr.birth = t;
        tr.states.push_back(model.sample_initial(rng));
        tracks.push_back(std::move(tr));
        next.push_back(tracks.size() - 1);
      }
      active = std::move(next);
    }
    canonicalize(tracks);
    if (params.max_targets_per_frame <= 0) return tracks;
    FrameCounts fc = frame_counts(tracks, params.frames);
    if (*std::max_element(fc.alive.begin(), fc.alive.end()) <= params.max_targets_per_frame)
      return tracks;
  }
}

ImageStack render_images(const TrackSet& tracks, const ModelParams& params) {
  ImageStack y(params.frames, params.geom.rows, params.geom.cols);
  for (int t = 1; t <= params.frames; ++t) {
    auto xs = states_at(tracks, t);
    y.frame(t) = render_frame(xs, t, params);
  }
  return y;
}

ImageStack sample_images(const TrackSet& tracks, const ModelParams& params, Rng& rng) {
  ImageStack y = render_images(tracks, params);
  for (int t = 1; t <= params.frames; ++t) {
    const double sd = std::sqrt(params.noise_var_at(t));
    Image& img = y.frame(t);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] += sd * standard_normal(rng);
  }
  return y;
}

double snr_db(double a, double noise_sd, const Geometry& geom) {
  if (!(a > 0.0) || !(noise_sd > 0.0)) throw ConfigError("snr needs positive intensity and noise");
  const double peak = a * geom.pitch * geom.pitch /
                      (2.0 * std::numbers::pi * geom.psf_sigma * geom.psf_sigma);
  return 20.0 * std::log10(peak / noise_sd);
}

ImageStack::ImageStack(int frames, int rows, int cols)
    : rows_(rows), cols_(cols),
      frames_(static_cast<std::size_t>(frames), Image::Zero(rows, cols)) {}

Eigen::Matrix<double, 5, 1> TargetState::to_vector() const {
  Eigen::Matrix<double, 5, 1> x;
  x << a, s(0), s(1), v(0), v(1);
  return x;
}

TargetState TargetState::from_vector(const Eigen::Matrix<double, 5, 1>& x) {
  TargetState st;
  st.a = x(0);
  st.s = Vec2(x(1), x(2));
  st.v = Vec2(x(3), x(4));
  return st;
}

}  // namespace mtt
