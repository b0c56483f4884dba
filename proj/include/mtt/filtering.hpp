#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtt/model.hpp"

namespace mtt {

/// Observed frame minus background and the responses of the given targets.
struct ResidualFrame {
  int t = 0;
  Image values;
};

struct FilteredFrame {
  int t = 0;
  Image values;
  double energy = 0.0;
};

ResidualFrame residual_frame(const Image& y, std::span<const TargetState> targets, int t,
                             const ModelParams& params);

/// Sum of squared unit responses over a full truncation square.
double filter_energy(const Geometry& geom);

/// Matched-filter output, an unbiased estimate of intensity for an isolated target
/// centred on the pixel.
FilteredFrame match_filter(const ResidualFrame& res, const ModelParams& params);
double filtered_value_at(const ResidualFrame& res, Pixel p, const ModelParams& params);

enum class GammaRuleKind { min_rule, max, fixed };

struct GammaRule {
  GammaRuleKind kind = GammaRuleKind::min_rule;
  double value = 0.0;

  /// Parses "min", "max" or "fixed:<value>".
  static GammaRule parse(const std::string& text);
  std::string to_string() const;
};

/// Peak threshold: min(mu_bi - 3 sd_bi, 3 sd_r / sqrt(E)) by default.
double gamma_threshold(int t, const ModelParams& params, const GammaRule& rule = {});

/// Strict local maxima over the in-bounds 8-neighbourhood that reach `threshold`.
/// Exact ties are broken in favour of the lexicographically smaller pixel.
std::vector<Pixel> candidate_peaks(const FilteredFrame& filt, double threshold,
                                   const std::optional<Window>& region = std::nullopt,
                                   std::span<const Pixel> exclude = {});

int default_window_half_width(const ModelParams& params);

/// Search window around the pixel nearest `s`, clipped to the image.
Window search_window(const Vec2& s, const ModelParams& params, int half_width = -1);

std::uint64_t hash_image(const Image& img);

/// Thread-safe cache of filtered frames keyed by frame index and residual hash.
class FilterCache {
 public:
  explicit FilterCache(std::size_t capacity = 512) : capacity_(capacity) {}

  std::shared_ptr<const FilteredFrame> get(const ResidualFrame& res, const ModelParams& params);
  std::size_t hits() const;
  std::size_t misses() const;
  void clear();

 private:
  std::size_t capacity_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<int, std::uint64_t>, std::shared_ptr<const FilteredFrame>> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace mtt
