#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

#include "rcm/schedule.hpp"

namespace rcm {

/// Reproducible random stream backed by the 64-bit Mersenne Twister.
///
/// std::mt19937_64's output sequence is fixed by the C++ standard, so the raw
/// 64-bit draws are bit-identical on every conforming platform. Uniform and
/// Gaussian variates are derived here rather than through <random>
/// distributions, whose algorithms are implementation-defined.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n); unbiased.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  /// Independent stream for worker `offset`, derived by splitmix64 of seed + offset.
  SeededRng child(std::uint64_t offset) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

struct SamplerConfig {
  double tau = 0.95;
  double p_large = 0.95;
  int k_max = 5;

  void validate() const;
};

/// exp(U), U uniform on [ln lo, ln hi]; the result is clamped into [lo, hi].
double sample_log_uniform(SeededRng& rng, double lo, double hi);

/// Noise-emphasized mixture: with probability p_large draw log-uniform on
/// [tau * sigma_max, sigma_max], otherwise on the full [sigma_min, sigma_max].
double sample_bimodal(SeededRng& rng, const NoiseSchedule& schedule, const SamplerConfig& config);

struct IndexPair {
  int n_low;
  int n_high;
};

/// Gap k uniform on {1..k_max}, then n_low uniform on {0..n_levels-1-k}.
/// Indices follow NoiseSchedule::level_sigma, so n_high is the noisier level.
IndexPair sample_index_pair(SeededRng& rng, int n_levels, int k_max);

}  // namespace rcm
