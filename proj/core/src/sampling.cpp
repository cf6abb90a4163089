#include "rcm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rcm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double SeededRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_int(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("uniform_int: empty range");
  // Lemire's multiply-shift with rejection of the biased low band.
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double SeededRng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

SeededRng SeededRng::child(std::uint64_t offset) const { return SeededRng(splitmix64(seed_ + offset)); }

void SamplerConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("sampler: tau must lie in (0, 1)");
  if (!(p_large >= 0.0 && p_large <= 1.0)) throw InvalidArgument("sampler: p_large must lie in [0, 1]");
  if (k_max < 1) throw InvalidArgument("sampler: k_max must be >= 1");
}

double sample_log_uniform(SeededRng& rng, double lo, double hi) {
  if (!(lo > 0.0 && lo < hi)) {
    throw InvalidArgument("sample_log_uniform: need 0 < lo < hi, got [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
  }
  const double a = std::log(lo), b = std::log(hi);
  return std::clamp(std::exp(a + (b - a) * rng.uniform()), lo, hi);
}

double sample_bimodal(SeededRng& rng, const NoiseSchedule& schedule, const SamplerConfig& config) {
  config.validate();
  if (rng.uniform() < config.p_large) {
    return sample_log_uniform(rng, config.tau * schedule.sigma_max(), schedule.sigma_max());
  }
  return sample_log_uniform(rng, schedule.sigma_min(), schedule.sigma_max());
}

IndexPair sample_index_pair(SeededRng& rng, int n_levels, int k_max) {
  if (k_max < 1 || n_levels <= k_max) {
    throw InvalidArgument("sample_index_pair: need n_levels > k_max >= 1, got n_levels=" + std::to_string(n_levels) +
                          ", k_max=" + std::to_string(k_max));
  }
  const int k = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k_max)));
  const int n_low = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_levels - k)));
  return {n_low, n_low + k};
}

}  // namespace rcm
