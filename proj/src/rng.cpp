#include "mtt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtt/errors.hpp"

namespace mtt {

double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double uniform01(Rng& rng) {
  for (;;) {
    double u = std::generate_canonical<double, 53>(rng);
    if (u > 0.0 && u < 1.0) return u;
  }
}

double sample_gamma(Rng& rng, double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(rng);
}

double sample_beta(Rng& rng, double a, double b) {
  double x = sample_gamma(rng, a, 1.0);
  double y = sample_gamma(rng, b, 1.0);
  if (x + y <= 0.0) return a / (a + b);
  return x / (x + y);
}

int sample_poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> dist(mean);
  return dist(rng);
}

double sample_inverse_gamma(Rng& rng, double shape, double scale) {
  double g = sample_gamma(rng, shape, 1.0);
  return scale / std::max(g, std::numeric_limits<double>::min());
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

double log_sum_exp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

std::size_t sample_log_weights(Rng& rng, std::span<const double> log_w) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_w)
    if (!std::isnan(v)) m = std::max(m, v);
  if (!std::isfinite(m)) throw NumericalError("no finite weight to sample from");
  double total = 0.0;
  for (double v : log_w) total += std::isnan(v) ? 0.0 : std::exp(v - m);
  double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    if (std::isnan(log_w[i])) continue;
    double w = std::exp(log_w[i] - m);
    if (w <= 0.0) continue;
    acc += w;
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mtt
