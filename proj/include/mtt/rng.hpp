#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mtt {

using Rng = std::mt19937_64;

double standard_normal(Rng& rng);

/// Uniform draw on the open interval (0, 1).
double uniform01(Rng& rng);

double sample_gamma(Rng& rng, double shape, double scale);
double sample_beta(Rng& rng, double a, double b);
int sample_poisson(Rng& rng, double mean);

/// Inverse-gamma draw with density proportional to x^(-shape-1) exp(-scale/x).
double sample_inverse_gamma(Rng& rng, double shape, double scale);

std::size_t uniform_index(Rng& rng, std::size_t n);

/// Draws an index with probability proportional to exp(log_w[i]).
/// Throws NumericalError if no weight is finite.
std::size_t sample_log_weights(Rng& rng, std::span<const double> log_w);

double log_sum_exp(std::span<const double> values);

/// Derives an independent stream seed from a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mtt
