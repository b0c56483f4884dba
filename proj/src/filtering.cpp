#include "mtt/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>

#include "mtt/errors.hpp"

namespace mtt {

namespace {

Image unit_kernel(const Geometry& g) {
  const int h = g.trunc / 2;
  Image k(g.trunc, g.trunc);
  for (int dr = -h; dr <= h; ++dr)
    for (int dc = -h; dc <= h; ++dc) k(dr + h, dc + h) = psf_unit(Vec2::Zero(), dr, dc, g);
  return k;
}

}  // namespace

ResidualFrame residual_frame(const Image& y, std::span<const TargetState> targets, int t,
                             const ModelParams& params) {
  ResidualFrame res;
  res.t = t;
  res.values = y.array() - params.background_at(t);
  for (const auto& x : targets) add_target(res.values, x, params.geom, -1.0);
  return res;
}

double filter_energy(const Geometry& geom) { return unit_kernel(geom).squaredNorm(); }

FilteredFrame match_filter(const ResidualFrame& res, const ModelParams& params) {
  const Geometry& g = params.geom;
  const Image k = unit_kernel(g);
  const double e = k.squaredNorm();
  const int h = g.trunc / 2;
  const int rows = static_cast<int>(res.values.rows());
  const int cols = static_cast<int>(res.values.cols());
  FilteredFrame out;
  out.t = res.t;
  out.energy = e;
  out.values = Image::Zero(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int r0 = std::max(r - h, 0), r1 = std::min(r + h, rows - 1);
    for (int c = 0; c < cols; ++c) {
      const int c0 = std::max(c - h, 0), c1 = std::min(c + h, cols - 1);
      double acc = 0.0;
      for (int i = r0; i <= r1; ++i)
        for (int j = c0; j <= c1; ++j) acc += res.values(i, j) * k(i - r + h, j - c + h);
      out.values(r, c) = acc / e;
    }
  }
  return out;
}

double filtered_value_at(const ResidualFrame& res, Pixel p, const ModelParams& params) {
  const Geometry& g = params.geom;
  const Vec2 s(g.pitch * p.row, g.pitch * p.col);
  Window w = truncation_square(s, g);
  double acc = 0.0;
  for (int r = w.r0; r <= w.r1; ++r)
    for (int c = w.c0; c <= w.c1; ++c) acc += res.values(r, c) * psf_unit(s, r, c, g);
  return acc / filter_energy(g);
}

GammaRule GammaRule::parse(const std::string& text) {
  if (text == "min") return {GammaRuleKind::min_rule, 0.0};
  if (text == "max") return {GammaRuleKind::max, 0.0};
  const std::string prefix = "fixed:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      std::string rest = text.substr(prefix.size());
      double v = std::stod(rest, &used);
      if (used == rest.size()) return {GammaRuleKind::fixed, v};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown threshold rule '" + text + "'");
}

std::string GammaRule::to_string() const {
  switch (kind) {
    case GammaRuleKind::min_rule: return "min";
    case GammaRuleKind::max: return "max";
    case GammaRuleKind::fixed: return "fixed:" + std::to_string(value);
  }
  return "min";
}

double gamma_threshold(int t, const ModelParams& params, const GammaRule& rule) {
  if (rule.kind == GammaRuleKind::fixed) return rule.value;
  const double intensity = params.dyn.mu_bi - 3.0 * std::sqrt(params.dyn.var_bi);
  const double noise = 3.0 * std::sqrt(params.noise_var_at(t)) / std::sqrt(filter_energy(params.geom));
  return rule.kind == GammaRuleKind::max ? std::max(intensity, noise) : std::min(intensity, noise);
}

std::vector<Pixel> candidate_peaks(const FilteredFrame& filt, double threshold,
                                   const std::optional<Window>& region,
                                   std::span<const Pixel> exclude) {
  const int rows = static_cast<int>(filt.values.rows());
  const int cols = static_cast<int>(filt.values.cols());
  Window w = region ? region->clipped(rows, cols) : Window{0, rows - 1, 0, cols - 1};
  std::vector<Pixel> peaks;
  for (int r = w.r0; r <= w.r1; ++r) {
    for (int c = w.c0; c <= w.c1; ++c) {
      const double v = filt.values(r, c);
      if (!(v >= threshold)) continue;
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          const double u = filt.values(rr, cc);
          if (u > v || (u == v && Pixel{rr, cc} < Pixel{r, c})) {
            peak = false;
            break;
          }
        }
      }
      if (!peak) continue;
      if (std::find(exclude.begin(), exclude.end(), Pixel{r, c}) != exclude.end()) continue;
      peaks.push_back({r, c});
    }
  }
  return peaks;
}

int default_window_half_width(const ModelParams& params) {
  const double w = 3.0 * std::sqrt(params.dyn.var_bv) * params.dt + 3.0 * params.geom.psf_sigma;
  return static_cast<int>(std::ceil(w / params.geom.pitch));
}

Window search_window(const Vec2& s, const ModelParams& params, int half_width) {
  const int h = half_width >= 0 ? half_width : default_window_half_width(params);
  if (!std::isfinite(s(0)) || !std::isfinite(s(1))) return Window{};
  const double limit = 1e6;
  if (std::abs(s(0)) > limit * params.geom.pitch || std::abs(s(1)) > limit * params.geom.pitch)
    return Window{};
  Pixel c = nearest_pixel(s, params.geom.pitch);
  return Window{c.row - h, c.row + h, c.col - h, c.col + h}.clipped(params.geom.rows,
                                                                    params.geom.cols);
}

std::uint64_t hash_image(const Image& img) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(img.data());
  const std::size_t n = static_cast<std::size_t>(img.size()) * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::shared_ptr<const FilteredFrame> FilterCache::get(const ResidualFrame& res,
                                                      const ModelParams& params) {
  const auto key = std::make_pair(res.t, hash_image(res.values));
  std::shared_ptr<const FilteredFrame> found;
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) found = it->second;
  }
  if (found) {
    std::unique_lock lock(mutex_);
    ++hits_;
    return found;
  }
  auto filt = std::make_shared<const FilteredFrame>(match_filter(res, params));
  std::unique_lock lock(mutex_);
  ++misses_;
  if (entries_.size() >= capacity_) entries_.clear();
  entries_.emplace(key, filt);
  return filt;
}

std::size_t FilterCache::hits() const {
  std::shared_lock lock(mutex_);
  return hits_;
}

std::size_t FilterCache::misses() const {
  std::shared_lock lock(mutex_);
  return misses_;
}

void FilterCache::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

}  // namespace mtt
