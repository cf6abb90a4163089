#include "rcm/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rcm/ops.hpp"

namespace rcm {

void TrainConfig::validate() const {
  if (!(lambda_consist >= 0.0 && lambda_fixed >= 0.0)) throw InvalidArgument("train: loss weights must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("train: betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw InvalidArgument("train: adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train: weight_decay must be >= 0");
  if (iterations < 0) throw InvalidArgument("train: iterations must be >= 0");
  if (batch_size < 1 || patch_size < 1) throw InvalidArgument("train: batch_size and patch_size must be positive");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw InvalidArgument("train: flip_prob must lie in [0, 1]");
  if (checkpoint_every < 1) throw InvalidArgument("train: checkpoint_every must be >= 1");
}

Tensor euler_step(const Tensor& x_high, double sigma_high, double sigma_low, const Tensor& x0_target) {
  if (x_high.rank() == 0) throw InvalidArgument("euler_step: x_high must be batch-major");
  const std::vector<double> hi(x_high.dim(0), sigma_high), lo(x_high.dim(0), sigma_low);
  return euler_step(x_high, hi, lo, x0_target);
}

Tensor euler_step(const Tensor& x_high, std::span<const double> sigma_high, std::span<const double> sigma_low,
                  const Tensor& x0_target) {
  if (x_high.shape() != x0_target.shape()) {
    throw InvalidArgument("euler_step: x_high " + shape_str(x_high.shape()) + " vs target " +
                          shape_str(x0_target.shape()));
  }
  if (x_high.rank() == 0 || sigma_high.size() != x_high.dim(0) || sigma_low.size() != x_high.dim(0)) {
    throw InvalidArgument("euler_step: need one sigma pair per sample");
  }
  const std::size_t per = x_high.numel() / x_high.dim(0);
  auto xh = x_high.data(), xt = x0_target.data();
  std::vector<double> out(xh.size());
  for (std::size_t b = 0; b < sigma_high.size(); ++b) {
    if (sigma_high[b] == 0.0) throw InvalidArgument("euler_step: sigma_high must be nonzero");
    if (sigma_low[b] > sigma_high[b]) throw InvalidArgument("euler_step: sigma_low must not exceed sigma_high");
    const double step = sigma_low[b] - sigma_high[b];
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) out[i] = xh[i] + step * (xh[i] - xt[i]) / sigma_high[b];
  }
  return Tensor::from(x_high.shape(), std::move(out));
}

namespace {

Tensor gaussian_like(const Tensor& like, SeededRng& rng) {
  std::vector<double> v(like.numel());
  for (auto& e : v) e = rng.normal();
  return Tensor::from(like.shape(), std::move(v));
}

void require_batch(const TrainingBatch& batch) {
  if (!batch.x0.defined() || batch.x0.rank() != 4 || batch.x0.dim(0) == 0) {
    throw InvalidArgument("loss: batch must be a nonempty [B,C,H,W] tensor");
  }
}

}  // namespace

Tensor consistency_loss_at(const DenoiserModel& model, const TrainingBatch& batch, std::span<const double> sigma_low,
                           std::span<const double> sigma_high, const Tensor& noise) {
  require_batch(batch);
  const auto x_high = add_noise(batch.x0.detach(), sigma_high, noise);
  // Target from the EMA model; evaluated under no-grad so theta_ema never joins the graph.
  const auto target = denoiser_forward(model, x_high, sigma_high, batch.condition, /*use_ema=*/true);
  const auto x_low = euler_step(x_high, sigma_high, sigma_low, target);
  const auto pred = denoiser_forward(model, x_low, sigma_low, batch.condition, /*use_ema=*/false);
  std::vector<double> weights;
  for (double s : sigma_low) weights.push_back(model.schedule().snr_weight(s));
  return weighted_mse(pred, target, weights);
}

Tensor consistency_loss(const DenoiserModel& model, const TrainingBatch& batch, const SamplerConfig& sampler,
                        SeededRng& rng) {
  require_batch(batch);
  sampler.validate();
  const auto& sched = model.schedule();
  std::vector<double> lo, hi;
  for (std::size_t b = 0; b < batch.x0.dim(0); ++b) {
    const auto pair = sample_index_pair(rng, sched.n_levels(), sampler.k_max);
    lo.push_back(sched.level_sigma(pair.n_low));
    hi.push_back(sched.level_sigma(pair.n_high));
  }
  const auto noise = gaussian_like(batch.x0, rng);
  return consistency_loss_at(model, batch, lo, hi, noise);
}

Tensor fixed_loss_at(const DenoiserModel& model, const TrainingBatch& batch, std::span<const double> sigmas,
                     const Tensor& noise) {
  require_batch(batch);
  const auto x0 = batch.x0.detach();
  const auto pred = denoiser_forward(model, add_noise(x0, sigmas, noise), sigmas, batch.condition, false);
  const std::vector<double> ones(sigmas.size(), 1.0);
  return weighted_mse(pred, x0, ones);
}

Tensor fixed_loss(const DenoiserModel& model, const TrainingBatch& batch, const SamplerConfig& sampler,
                  bool noise_emphasis, SeededRng& rng) {
  require_batch(batch);
  const auto& sched = model.schedule();
  std::vector<double> sigmas;
  for (std::size_t b = 0; b < batch.x0.dim(0); ++b) {
    sigmas.push_back(noise_emphasis ? sample_bimodal(rng, sched, sampler)
                                    : sample_log_uniform(rng, sched.sigma_min(), sched.sigma_max()));
  }
  const auto noise = gaussian_like(batch.x0, rng);
  return fixed_loss_at(model, batch, sigmas, noise);
}

double ema_mu(std::int64_t k) {
  if (k < 0) throw InvalidArgument("ema_mu: k must be >= 0");
  const double kd = static_cast<double>(k);
  return std::min(0.9999, (1.0 + kd) / (10.0 + kd));
}

void ema_update(DenoiserModel& model, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidArgument("ema_update: mu must lie in [0, 1]");
  auto online = model.params().begin();
  for (auto& [name, shadow] : model.ema_params()) {
    auto dst = shadow.mutable_data();
    auto src = online->second.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = mu * dst[i] + (1.0 - mu) * src[i];
    ++online;
  }
}

AdamState AdamState::zeros_like(const ParameterStore& params) {
  AdamState s;
  for (const auto& [_, t] : params) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

void adamw_step(AdamState& state, ParameterStore& params, const TrainConfig& config) {
  if (state.m.size() != params.size()) state = AdamState::zeros_like(params);
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  const double decay = 1.0 - config.learning_rate * config.weight_decay;
  std::size_t idx = 0;
  for (auto& [name, p] : params) {
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& m = state.m[idx];
    auto& v = state.v[idx];
    if (m.size() != w.size()) throw InvalidArgument("adamw: moment buffer shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] = w[i] * decay - config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
    ++idx;
  }
}

SampledBatch sample_batch(const PairedDataset& dataset, const TrainConfig& config, SeededRng& rng) {
  if (dataset.empty()) throw DataError("sample_batch: dataset is empty");
  const auto bsz = static_cast<std::size_t>(config.batch_size);
  const auto p = static_cast<std::size_t>(config.patch_size);
  std::vector<double> cond(bsz * 3 * p * p), refl(bsz * 3 * p * p), illum(bsz * p * p);
  for (std::size_t b = 0; b < bsz; ++b) {
    const auto& s = dataset[static_cast<std::size_t>(rng.uniform_int(dataset.size()))];
    const std::size_t h = s.low.height(), w = s.low.width();
    if (h < p || w < p) {
      throw DataError("sample '" + s.name + "' (" + std::to_string(h) + "x" + std::to_string(w) +
                      ") is smaller than patch_size " + std::to_string(p));
    }
    const std::size_t oy = rng.uniform_int(h - p + 1), ox = rng.uniform_int(w - p + 1);
    const bool flip = rng.uniform() < config.flip_prob;
    auto copy_patch = [&](std::span<const double> src, std::size_t channels, std::vector<double>& dst) {
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) {
            const std::size_t sx = ox + (flip ? p - 1 - x : x);
            dst[((b * channels + c) * p + y) * p + x] = src[(c * h + oy + y) * w + sx];
          }
    };
    copy_patch(s.low.data(), 3, cond);
    copy_patch(s.target.reflectance.data(), 3, refl);
    copy_patch(s.target.illumination.data(), 1, illum);
  }
  auto condition = Tensor::from({bsz, 3, p, p}, std::move(cond));
  return {{Tensor::from({bsz, 3, p, p}, std::move(refl)), condition},
          {Tensor::from({bsz, 1, p, p}, std::move(illum)), condition}};
}

namespace {

LossRecord train_component(DenoiserModel& model, ComponentState& state, const TrainingBatch& batch,
                           const SamplerConfig& sampler, const TrainConfig& config, SeededRng& rng,
                           std::int64_t step) {
  model.params().zero_grad();
  LossRecord rec{step, 0.0, 0.0, 0.0};
  Tensor total;
  if (config.lambda_consist > 0.0) {
    auto lc = consistency_loss(model, batch, sampler, rng);
    rec.consist = lc.item();
    total = scale(lc, config.lambda_consist);
  }
  if (config.lambda_fixed > 0.0) {
    auto lf = fixed_loss(model, batch, sampler, config.noise_emphasis, rng);
    rec.fixed = lf.item();
    auto term = scale(lf, config.lambda_fixed);
    total = total.defined() ? add(total, term) : term;
  }
  if (total.defined()) {
    rec.total = total.item();
    total.backward();
  }
  adamw_step(state.optimizer, model.params(), config);
  ema_update(model, ema_mu(state.ema_updates));
  ++state.ema_updates;
  state.history.push_back(rec);
  return rec;
}

}  // namespace

TrainState train_loop(DenoiserModel& reflectance, DenoiserModel& illumination, const PairedDataset& dataset,
                      const SamplerConfig& sampler, const TrainConfig& config, std::uint64_t seed,
                      const CheckpointHook& on_checkpoint) {
  config.validate();
  sampler.validate();
  if (dataset.empty()) throw DataError("train_loop: dataset is empty");
  if (reflectance.config().out_channels != 3 || illumination.config().out_channels != 1) {
    throw InvalidArgument("train_loop: expected a 3-channel reflectance and a 1-channel illumination model");
  }

  TrainState state;
  state.rng = SeededRng(seed);
  state.reflectance.optimizer = AdamState::zeros_like(reflectance.params());
  state.illumination.optimizer = AdamState::zeros_like(illumination.params());

  for (std::int64_t it = 0; it < config.iterations; ++it) {
    const auto batch = sample_batch(dataset, config, state.rng);
    const auto r = train_component(reflectance, state.reflectance, batch.reflectance, sampler, config, state.rng, it);
    const auto l =
        train_component(illumination, state.illumination, batch.illumination, sampler, config, state.rng, it);
    LossRecord combined{it, r.consist + l.consist, r.fixed + l.fixed, 0.0};
    combined.total = config.lambda_consist * combined.consist + config.lambda_fixed * combined.fixed;
    state.history.push_back(combined);
    state.step = it + 1;
    if (on_checkpoint && state.step % config.checkpoint_every == 0) on_checkpoint(state, state.step);
  }
  return state;
}

}  // namespace rcm
