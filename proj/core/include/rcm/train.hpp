#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rcm/dataset.hpp"
#include "rcm/net.hpp"
#include "rcm/sampling.hpp"

namespace rcm {

struct TrainConfig {
  double lambda_consist = 1.0;
  double lambda_fixed = 0.3;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::int64_t iterations = 2000;
  int batch_size = 4;
  int patch_size = 32;
  double flip_prob = 0.5;
  std::int64_t checkpoint_every = 500;
  /// When false, L_fixed draws sigma from the plain log-uniform distribution.
  bool noise_emphasis = true;

  void validate() const;
};

/// A batch for one component model: clean targets x0 [B,C,H,W] and conditions [B,3,H,W].
struct TrainingBatch {
  Tensor x0;
  Tensor condition;
};

struct LossRecord {
  std::int64_t step;
  double consist;
  double fixed;
  double total;
};

struct AdamState {
  std::int64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState zeros_like(const ParameterStore& params);
};

struct ComponentState {
  AdamState optimizer;
  std::int64_t ema_updates = 0;  // k in mu(k), counted per model
  std::vector<LossRecord> history;
};

struct TrainState {
  std::int64_t step = 0;
  SeededRng rng;
  ComponentState reflectance;
  ComponentState illumination;
  /// Sums over both component models; total = lambda_c * consist + lambda_f * fixed.
  std::vector<LossRecord> history;
};

/// x_low = x_high + (sigma_low - sigma_high) * (x_high - x0_target) / sigma_high.
Tensor euler_step(const Tensor& x_high, double sigma_high, double sigma_low, const Tensor& x0_target);
/// Per-sample form over a batch.
Tensor euler_step(const Tensor& x_high, std::span<const double> sigma_high, std::span<const double> sigma_low,
                  const Tensor& x0_target);

/// Temporal-consistency loss for explicit noise levels and noise draw.
/// The target is the EMA model at sigma_high with gradients stopped.
Tensor consistency_loss_at(const DenoiserModel& model, const TrainingBatch& batch, std::span<const double> sigma_low,
                           std::span<const double> sigma_high, const Tensor& noise);

/// Draws a grid index pair and Gaussian noise per sample, then evaluates consistency_loss_at.
Tensor consistency_loss(const DenoiserModel& model, const TrainingBatch& batch, const SamplerConfig& sampler,
                        SeededRng& rng);

/// Mean squared error between the one-step prediction at sigma and the clean target.
Tensor fixed_loss_at(const DenoiserModel& model, const TrainingBatch& batch, std::span<const double> sigmas,
                     const Tensor& noise);

/// Draws sigma from the bimodal sampler (or plain log-uniform when noise_emphasis is off).
Tensor fixed_loss(const DenoiserModel& model, const TrainingBatch& batch, const SamplerConfig& sampler,
                  bool noise_emphasis, SeededRng& rng);

/// min(0.9999, (1 + k) / (10 + k)).
double ema_mu(std::int64_t k);

/// theta_ema <- mu * theta_ema + (1 - mu) * theta.
void ema_update(DenoiserModel& model, double mu);

/// One AdamW update using the gradients held by `params`.
void adamw_step(AdamState& state, ParameterStore& params, const TrainConfig& config);

/// Aligned random crop and horizontal flip of `batch_size` dataset samples.
struct SampledBatch {
  TrainingBatch reflectance;
  TrainingBatch illumination;
};
SampledBatch sample_batch(const PairedDataset& dataset, const TrainConfig& config, SeededRng& rng);

/// Called after step `step` completes (1-based) whenever step % checkpoint_every == 0.
using CheckpointHook = std::function<void(const TrainState&, std::int64_t step)>;

/// Joint training of the reflectance and illumination models.
TrainState train_loop(DenoiserModel& reflectance, DenoiserModel& illumination, const PairedDataset& dataset,
                      const SamplerConfig& sampler, const TrainConfig& config, std::uint64_t seed,
                      const CheckpointHook& on_checkpoint = {});

}  // namespace rcm
