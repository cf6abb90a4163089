#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "rcm/parameter_store.hpp"
#include "rcm/schedule.hpp"

namespace rcm {

struct DenoiserConfig {
  int in_channels = 6;  // condition image (3) + noisy component
  int out_channels = 3;
  int base_width = 16;
  std::vector<int> channel_multipliers{1, 2, 4};
  int fourier_bands = 64;
  int groups = 8;

  static DenoiserConfig reflectance() { return {}; }
  static DenoiserConfig illumination() {
    DenoiserConfig c;
    c.in_channels = 4;
    c.out_channels = 1;
    return c;
  }

  void validate() const;
  int embedding_dim() const { return 4 * base_width; }
  /// Spatial sizes must be multiples of this.
  int downsample_factor() const { return 1 << (channel_multipliers.size() - 1); }
};

bool operator==(const DenoiserConfig& a, const DenoiserConfig& b);

/// Log-spaced frequencies used by the time embedding.
std::vector<double> fourier_frequencies(int bands);

/// [sin(2 pi f_j ln sigma)..., cos(2 pi f_j ln sigma)...] of length 2 * bands.
Tensor fourier_time_embedding(double sigma, int bands);
/// Batched form, shape [B, 2 * bands].
Tensor fourier_time_embedding(std::span<const double> sigmas, int bands);

/// GN(h) * (1 + gamma) + beta with gamma, beta of shape [B,C].
Tensor adagn(const Tensor& h, const Tensor& gamma, const Tensor& beta, int groups);

/// Adaptive group norm whose gamma and beta are affine maps of the embedding t_emb [B,D].
struct AdaGNProjection {
  Tensor gamma_weight, gamma_bias;  // [C,D], [C]
  Tensor beta_weight, beta_bias;
};
Tensor adagn(const Tensor& h, const Tensor& t_emb, const AdaGNProjection& proj, int groups);

constexpr double kGroupNormEps = 1e-5;

/// Conditional consistency denoiser
///   f(x, sigma | I) = c_skip(sigma) x + c_out(sigma) F([I, c_in(sigma) x], sigma)
/// with F a compact U-Net. Holds the online parameters and their EMA shadow.
class DenoiserModel {
 public:
  DenoiserModel(DenoiserConfig config, NoiseSchedule schedule, std::uint64_t init_seed);

  const DenoiserConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  ParameterStore& ema_params() { return ema_; }
  const ParameterStore& ema_params() const { return ema_; }

  /// The raw backbone F evaluated with the given parameter set.
  Tensor backbone(const ParameterStore& p, const Tensor& input, std::span<const double> sigmas) const;

  /// Number of denoiser evaluations since construction or the last reset.
  std::size_t forward_calls() const { return calls_->load(); }
  void reset_forward_calls() { calls_->store(0); }
  void count_forward() const { calls_->fetch_add(1); }

  void save(const std::filesystem::path& path) const;
  static DenoiserModel load(const std::filesystem::path& path);

 private:
  Tensor block(const ParameterStore& p, const std::string& name, const Tensor& x, const Tensor& t_act,
               int stride) const;

  DenoiserConfig config_;
  NoiseSchedule schedule_;
  ParameterStore params_;
  ParameterStore ema_;
  std::unique_ptr<std::atomic<std::size_t>> calls_ = std::make_unique<std::atomic<std::size_t>>(0);
};

/// Evaluates f for a batch; sigmas[b] applies to sample b. With use_ema the
/// shadow parameters are used and no graph is recorded.
Tensor denoiser_forward(const DenoiserModel& model, const Tensor& x_noisy, std::span<const double> sigmas,
                        const Tensor& condition, bool use_ema);
Tensor denoiser_forward(const DenoiserModel& model, const Tensor& x_noisy, double sigma, const Tensor& condition,
                        bool use_ema);

}  // namespace rcm
