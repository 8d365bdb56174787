#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mqud::diagnostics {

/// Means of `resamples` bootstrap resamples (with replacement, size n) of x.
/// Resample b draws from its own stream mix_seed(seed, b), so the serial and
/// parallel versions return identical vectors.
std::vector<double> bootstrap_means_serial(const std::vector<double>& x, int resamples, std::uint64_t seed);
std::vector<double> bootstrap_means_parallel(const std::vector<double>& x, int resamples, std::uint64_t seed);

/// Linear-interpolation percentile of sorted data, q in [0, 1].
double percentile_sorted(const std::vector<double>& sorted, double q);

/// Percentile interval [q_lo, q_hi] of the given means (copied and sorted).
std::pair<double, double> percentile_ci(std::vector<double> means, double lo_q = 0.025, double hi_q = 0.975);

double mean(const std::vector<double>& x);

}  // namespace mqud::diagnostics
