#include "mtt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "mtt/errors.hpp"
#include "mtt/filtering.hpp"
#include "mtt/representation.hpp"

namespace mtt {

std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw ConfigError("assignment needs no more rows than columns");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials method with 1-based indices; p[j] is the row matched to column j.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assign;
}

double ospa_distance(std::span<const Vec2> estimate, std::span<const Vec2> truth, const OspaParams& params) {
  if (!(params.c > 0.0) || !(params.p >= 1.0)) throw ConfigError("OSPA needs c > 0 and p >= 1");
  std::span<const Vec2> small = estimate, large = truth;
  if (small.size() > large.size()) std::swap(small, large);
  const std::size_t m = small.size(), n = large.size();
  if (n == 0) return 0.0;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(std::min(params.c, (small[i] - large[j]).norm()), params.p);
  double total = 0.0;
  const auto assign = optimal_assignment(cost);
  for (std::size_t i = 0; i < m; ++i) total += cost(static_cast<Eigen::Index>(i), assign[i]);
  total += std::pow(params.c, params.p) * static_cast<double>(n - m);
  return std::pow(total / static_cast<double>(n), 1.0 / params.p);
}

std::vector<Vec2> positions_at(const TrackSet& tracks, int t) {
  std::vector<Vec2> out;
  for (const auto& tr : tracks)
    if (tr.alive_at(t)) out.push_back(tr.at(t).s);
  return out;
}

std::vector<double> ospa_per_frame(const TrackSet& estimate, const TrackSet& truth, int frames,
                                   const OspaParams& params) {
  std::vector<double> out;
  for (int t = 1; t <= frames; ++t) {
    const auto e = positions_at(estimate, t);
    const auto g = positions_at(truth, t);
    out.push_back(ospa_distance(e, g, params));
  }
  return out;
}

TrackSet greedy_nn_tracker(const ImageStack& y, const ModelParams& params,
                           const NearestNeighbourConfig& config) {
  TrackSet tracks;
  std::vector<std::size_t> active;
  for (int t = 1; t <= y.frames(); ++t) {
    ResidualFrame res = residual_frame(y.frame(t), {}, t, params);
    FilteredFrame filt = match_filter(res, params);
    const auto peaks = candidate_peaks(filt, config.threshold);
    std::vector<TargetState> dets;
    for (Pixel p : peaks) {
      TargetState x;
      x.a = filt.values(p.row, p.col);
      x.s = Vec2(params.geom.pitch * p.row, params.geom.pitch * p.col);
      dets.push_back(x);
    }
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = 0; j < dets.size(); ++j) {
        const double d = (tracks[active[i]].states.back().s - dets[j].s).norm();
        if (d <= config.gate) pairs.emplace_back(d, i, j);
      }
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> track_used(active.size(), 0), det_used(dets.size(), 0);
    std::vector<std::size_t> next;
    for (const auto& [d, i, j] : pairs) {
      if (track_used[i] || det_used[j]) continue;
      track_used[i] = det_used[j] = 1;
      tracks[active[i]].states.push_back(dets[j]);
      next.push_back(active[i]);
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (det_used[j]) continue;
      Track tr;
      tr.birth = t;
      tr.states.push_back(dets[j]);
      tracks.push_back(std::move(tr));
      next.push_back(tracks.size() - 1);
    }
    active = std::move(next);
  }
  for (auto& tr : tracks) {
    auto& xs = tr.states;
    for (std::size_t j = 1; j < xs.size(); ++j) xs[j].v = (xs[j].s - xs[j - 1].s) / params.dt;
    if (xs.size() > 1) xs[0].v = xs[1].v;
  }
  canonicalize(tracks);
  return tracks;
}

double Histogram::bin_center(std::size_t i) const {
  const double w = (hi - lo) / static_cast<double>(counts.size());
  return lo + (static_cast<double>(i) + 0.5) * w;
}

double Histogram::mode() const {
  if (counts.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto it = std::max_element(counts.begin(), counts.end());
  return bin_center(static_cast<std::size_t>(it - counts.begin()));
}

Histogram make_histogram(std::span<const double> values, int bins) {
  Histogram h;
  if (values.empty() || bins <= 0) return h;
  h.lo = *std::min_element(values.begin(), values.end());
  h.hi = *std::max_element(values.begin(), values.end());
  if (!(h.hi > h.lo)) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double w = (h.hi - h.lo) / bins;
  for (double v : values) {
    auto i = static_cast<long>(std::floor((v - h.lo) / w));
    i = std::clamp(i, 0L, static_cast<long>(bins - 1));
    h.counts[static_cast<std::size_t>(i)]++;
  }
  return h;
}

ChainSummary summarize_chain(std::span<const SampleRecord> samples, double burn_in_fraction,
                             const TrackSet* truth, const OspaParams& ospa, int bins) {
  ChainSummary out;
  if (samples.empty()) throw ConfigError("cannot summarise an empty sample stream");
  const std::size_t skip = static_cast<std::size_t>(
      std::floor(std::clamp(burn_in_fraction, 0.0, 1.0) * static_cast<double>(samples.size())));
  for (const auto& s : samples) {
    out.iterations.push_back(s.iteration);
    out.log_joint.push_back(s.log_joint);
    out.total_targets.push_back(static_cast<int>(s.tracks.size()));
  }
  const int frames = samples.front().params.frames;
  const auto names = param_names(frames);
  std::vector<std::vector<double>> values(names.size());
  std::vector<std::vector<long>> count_hist(static_cast<std::size_t>(frames));
  if (truth) out.ospa.assign(static_cast<std::size_t>(frames), 0.0);
  std::size_t kept = 0;
  for (std::size_t i = skip; i < samples.size(); ++i) {
    const auto& s = samples[i];
    ++kept;
    const auto pv = param_vector(s.params);
    for (std::size_t c = 0; c < pv.size() && c < values.size(); ++c) values[c].push_back(pv[c]);
    const auto counts = s.counts.empty() ? frame_counts(s.tracks, frames).alive : s.counts;
    out.counts.push_back(counts);
    for (int t = 0; t < frames; ++t) {
      auto& h = count_hist[static_cast<std::size_t>(t)];
      const auto k = static_cast<std::size_t>(counts[static_cast<std::size_t>(t)]);
      if (h.size() <= k) h.resize(k + 1, 0);
      h[k]++;
    }
    if (truth) {
      const auto o = ospa_per_frame(s.tracks, *truth, frames, ospa);
      for (int t = 0; t < frames; ++t) out.ospa[static_cast<std::size_t>(t)] += o[static_cast<std::size_t>(t)];
    }
  }
  for (const auto& h : count_hist)
    out.count_mode.push_back(h.empty() ? 0 : static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin()));
  if (truth && kept > 0) {
    for (auto& o : out.ospa) o /= static_cast<double>(kept);
    double sum = 0.0;
    for (double o : out.ospa) sum += o;
    out.mean_ospa = sum / static_cast<double>(frames);
  }
  for (std::size_t c = 0; c < names.size(); ++c) {
    ParamSummary ps;
    ps.name = names[c];
    const auto& v = values[c];
    if (!v.empty()) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      ps.mean = mean;
      ps.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      ps.hist = make_histogram(v, bins);
    }
    out.params.push_back(std::move(ps));
  }
  return out;
}

}  // namespace mtt
