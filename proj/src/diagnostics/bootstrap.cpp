#include "mqud/diagnostics/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"

namespace mqud::diagnostics {

namespace {

double resample_mean(const std::vector<double>& x, std::uint64_t seed, std::uint64_t b) {
  std::mt19937_64 rng(util::mix_seed(seed, b));
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[pick(rng)];
  return sum / static_cast<double>(x.size());
}

void check(const std::vector<double>& x, int resamples) {
  if (x.empty()) throw Error(ErrorKind::EmptyInput, "bootstrap over no items");
  if (resamples < 1) throw Error(ErrorKind::ConfigError, "resamples must be >= 1");
}

}  // namespace

std::vector<double> bootstrap_means_serial(const std::vector<double>& x, int resamples, std::uint64_t seed) {
  check(x, resamples);
  std::vector<double> out(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) out[static_cast<std::size_t>(b)] = resample_mean(x, seed, static_cast<std::uint64_t>(b));
  return out;
}

std::vector<double> bootstrap_means_parallel(const std::vector<double>& x, int resamples, std::uint64_t seed) {
  check(x, resamples);
  std::vector<double> out(static_cast<std::size_t>(resamples));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < resamples; ++b) out[static_cast<std::size_t>(b)] = resample_mean(x, seed, static_cast<std::uint64_t>(b));
  return out;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "percentile of no values");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::pair<double, double> percentile_ci(std::vector<double> means, double lo_q, double hi_q) {
  std::sort(means.begin(), means.end());
  return {percentile_sorted(means, lo_q), percentile_sorted(means, hi_q)};
}

double mean(const std::vector<double>& x) {
  if (x.empty()) throw Error(ErrorKind::EmptyInput, "mean of no values");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace mqud::diagnostics
