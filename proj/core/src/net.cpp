#include "rcm/net.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rcm/ops.hpp"
#include "rcm/sampling.hpp"

namespace rcm {

namespace {

constexpr double kMinFrequency = 0.02;
constexpr double kMaxFrequency = 2.0;

Tensor normal_init(SeededRng& rng, Shape shape, double stddev) {
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), true);
}

void add_conv(ParameterStore& p, SeededRng& rng, const std::string& name, int cin, int cout, double gain,
              bool zero = false) {
  const auto ci = static_cast<std::size_t>(cin), co = static_cast<std::size_t>(cout);
  const double stddev = gain / std::sqrt(static_cast<double>(cin * 9));
  p.add(name + ".weight", zero ? Tensor::zeros({co, ci, 3, 3}, true) : normal_init(rng, {co, ci, 3, 3}, stddev));
  p.add(name + ".bias", Tensor::zeros({co}, true));
}

void add_linear(ParameterStore& p, SeededRng& rng, const std::string& name, int din, int dout, bool zero = false) {
  const auto di = static_cast<std::size_t>(din), dn = static_cast<std::size_t>(dout);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(din));
  p.add(name + ".weight", zero ? Tensor::zeros({dn, di}, true) : normal_init(rng, {dn, di}, stddev));
  p.add(name + ".bias", Tensor::zeros({dn}, true));
}

void add_block(ParameterStore& p, SeededRng& rng, const std::string& name, int cin, int cout, int emb) {
  add_conv(p, rng, name + ".conv", cin, cout, std::numbers::sqrt2);
  // gamma/beta start at zero so every block begins as plain group norm.
  add_linear(p, rng, name + ".gamma", emb, cout, true);
  add_linear(p, rng, name + ".beta", emb, cout, true);
}

Tensor apply_conv(const ParameterStore& p, const std::string& name, const Tensor& x, int stride) {
  return conv2d(x, p.get(name + ".weight"), p.get(name + ".bias"), stride, 1);
}

Tensor apply_linear(const ParameterStore& p, const std::string& name, const Tensor& x) {
  return linear(x, p.get(name + ".weight"), p.get(name + ".bias"));
}

std::string level(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

}  // namespace

void DenoiserConfig::validate() const {
  if (out_channels < 1 || in_channels != out_channels + 3) {
    throw InvalidArgument("denoiser config: in_channels must equal out_channels + 3");
  }
  if (base_width < 1 || groups < 1 || base_width % groups != 0) {
    throw InvalidArgument("denoiser config: base_width must be a positive multiple of groups");
  }
  if (channel_multipliers.empty()) throw InvalidArgument("denoiser config: channel_multipliers is empty");
  for (int m : channel_multipliers)
    if (m < 1) throw InvalidArgument("denoiser config: channel multipliers must be >= 1");
  if (fourier_bands < 1) throw InvalidArgument("denoiser config: fourier_bands must be >= 1");
}

bool operator==(const DenoiserConfig& a, const DenoiserConfig& b) {
  return a.in_channels == b.in_channels && a.out_channels == b.out_channels && a.base_width == b.base_width &&
         a.channel_multipliers == b.channel_multipliers && a.fourier_bands == b.fourier_bands && a.groups == b.groups;
}

std::vector<double> fourier_frequencies(int bands) {
  if (bands < 1) throw InvalidArgument("fourier embedding: bands must be >= 1");
  std::vector<double> f(static_cast<std::size_t>(bands));
  const double ratio = std::log(kMaxFrequency / kMinFrequency);
  for (int j = 0; j < bands; ++j) {
    const double t = bands == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(bands - 1);
    f[static_cast<std::size_t>(j)] = kMinFrequency * std::exp(t * ratio);
  }
  return f;
}

Tensor fourier_time_embedding(std::span<const double> sigmas, int bands) {
  const auto freqs = fourier_frequencies(bands);
  const auto nb = static_cast<std::size_t>(bands);
  std::vector<double> out(sigmas.size() * 2 * nb);
  for (std::size_t b = 0; b < sigmas.size(); ++b) {
    if (!(sigmas[b] > 0.0)) throw InvalidArgument("fourier embedding: sigma must be positive");
    const double t = std::log(sigmas[b]);
    for (std::size_t j = 0; j < nb; ++j) {
      const double phase = 2.0 * std::numbers::pi * freqs[j] * t;
      out[b * 2 * nb + j] = std::sin(phase);
      out[b * 2 * nb + nb + j] = std::cos(phase);
    }
  }
  return Tensor::from({sigmas.size(), 2 * nb}, std::move(out));
}

Tensor fourier_time_embedding(double sigma, int bands) {
  auto batched = fourier_time_embedding(std::span<const double>(&sigma, 1), bands);
  return Tensor::from({batched.numel()}, std::vector<double>(batched.data().begin(), batched.data().end()));
}

Tensor adagn(const Tensor& h, const Tensor& gamma, const Tensor& beta, int groups) {
  if (h.rank() != 4) throw InvalidArgument("adagn: expected [B,C,H,W], got " + shape_str(h.shape()));
  return channel_affine(group_norm(h, groups, kGroupNormEps), add_scalar(gamma, 1.0), beta);
}

Tensor adagn(const Tensor& h, const Tensor& t_emb, const AdaGNProjection& proj, int groups) {
  if (t_emb.rank() != 2 || h.rank() != 4 || t_emb.dim(0) != h.dim(0)) {
    throw InvalidArgument("adagn: embedding " + shape_str(t_emb.shape()) + " does not match features " +
                          shape_str(h.shape()));
  }
  if (proj.gamma_weight.rank() != 2 || proj.gamma_weight.dim(0) != h.dim(1)) {
    throw InvalidArgument("adagn: projection " + shape_str(proj.gamma_weight.shape()) + " does not produce " +
                          std::to_string(h.dim(1)) + " channels");
  }
  return adagn(h, linear(t_emb, proj.gamma_weight, proj.gamma_bias), linear(t_emb, proj.beta_weight, proj.beta_bias),
               groups);
}

DenoiserModel::DenoiserModel(DenoiserConfig config, NoiseSchedule schedule, std::uint64_t init_seed)
    : config_(std::move(config)), schedule_(schedule) {
  config_.validate();
  SeededRng rng(init_seed);
  const int w = config_.base_width;
  const int emb = config_.embedding_dim();
  add_linear(params_, rng, "time.fc1", 2 * config_.fourier_bands, emb);
  add_linear(params_, rng, "time.fc2", emb, emb);

  const auto& mult = config_.channel_multipliers;
  int prev = config_.in_channels;
  for (std::size_t i = 0; i < mult.size(); ++i) {
    const int ch = w * mult[i];
    add_block(params_, rng, level("enc", i) + ".block0", prev, ch, emb);
    add_block(params_, rng, level("enc", i) + ".block1", ch, ch, emb);
    prev = ch;
  }
  for (std::size_t i = mult.size() - 1; i >= 1; --i) {
    const int ch = w * mult[i - 1];
    add_conv(params_, rng, level("dec", i - 1) + ".up", w * mult[i], ch, 1.0);
    add_block(params_, rng, level("dec", i - 1) + ".block0", ch, ch, emb);
  }
  // Zero output conv: F starts at 0 and f starts as the skip path.
  add_conv(params_, rng, "out", w, config_.out_channels, 1.0, true);

  ema_ = params_.clone(false);
}

Tensor DenoiserModel::block(const ParameterStore& p, const std::string& name, const Tensor& x, const Tensor& t_act,
                            int stride) const {
  auto h = apply_conv(p, name + ".conv", x, stride);
  AdaGNProjection proj{p.get(name + ".gamma.weight"), p.get(name + ".gamma.bias"), p.get(name + ".beta.weight"),
                       p.get(name + ".beta.bias")};
  return silu(adagn(h, t_act, proj, config_.groups));
}

Tensor DenoiserModel::backbone(const ParameterStore& p, const Tensor& input, std::span<const double> sigmas) const {
  auto t = fourier_time_embedding(sigmas, config_.fourier_bands);
  t = apply_linear(p, "time.fc2", silu(apply_linear(p, "time.fc1", t)));
  const auto t_act = silu(t);

  const auto levels = config_.channel_multipliers.size();
  std::vector<Tensor> skips;
  Tensor h = input;
  for (std::size_t i = 0; i < levels; ++i) {
    h = block(p, level("enc", i) + ".block0", h, t_act, i == 0 ? 1 : 2);
    h = block(p, level("enc", i) + ".block1", h, t_act, 1);
    skips.push_back(h);
  }
  for (std::size_t i = levels - 1; i >= 1; --i) {
    // Channel reduction runs at the coarse resolution, then nearest upsampling.
    h = upsample_nearest2x(apply_conv(p, level("dec", i - 1) + ".up", h, 1));
    h = add(h, skips[i - 1]);
    h = block(p, level("dec", i - 1) + ".block0", h, t_act, 1);
  }
  return apply_conv(p, "out", h, 1);
}

Tensor denoiser_forward(const DenoiserModel& model, const Tensor& x_noisy, std::span<const double> sigmas,
                        const Tensor& condition, bool use_ema) {
  const auto& cfg = model.config();
  if (x_noisy.rank() != 4 || x_noisy.dim(1) != static_cast<std::size_t>(cfg.out_channels)) {
    throw InvalidArgument("denoiser: x_noisy must be [B," + std::to_string(cfg.out_channels) + ",H,W], got " +
                          shape_str(x_noisy.shape()));
  }
  if (condition.rank() != 4 || condition.dim(1) != 3 || condition.dim(0) != x_noisy.dim(0) ||
      condition.dim(2) != x_noisy.dim(2) || condition.dim(3) != x_noisy.dim(3)) {
    throw InvalidArgument("denoiser: condition " + shape_str(condition.shape()) + " does not match x_noisy " +
                          shape_str(x_noisy.shape()));
  }
  if (sigmas.size() != x_noisy.dim(0)) {
    throw InvalidArgument("denoiser: " + std::to_string(sigmas.size()) + " sigmas for batch of " +
                          std::to_string(x_noisy.dim(0)));
  }
  const auto factor = static_cast<std::size_t>(cfg.downsample_factor());
  if (x_noisy.dim(2) % factor != 0 || x_noisy.dim(3) % factor != 0) {
    throw InvalidArgument("denoiser: spatial size " + std::to_string(x_noisy.dim(2)) + "x" +
                          std::to_string(x_noisy.dim(3)) + " is not divisible by " + std::to_string(factor) +
                          "; pad the image to a multiple of " + std::to_string(factor));
  }

  std::vector<double> c_skip, c_out, c_in;
  for (double s : sigmas) {
    const auto c = model.schedule().precondition(s);
    c_skip.push_back(c.c_skip);
    c_out.push_back(c.c_out);
    c_in.push_back(c.c_in);
  }

  model.count_forward();
  auto run = [&](const ParameterStore& p) {
    const auto input = concat_channels(condition, scale_batch(x_noisy, c_in));
    const auto f = model.backbone(p, input, sigmas);
    return add(scale_batch(x_noisy, c_skip), scale_batch(f, c_out));
  };
  if (use_ema) {
    NoGradGuard guard;
    return run(model.ema_params());
  }
  return run(model.params());
}

Tensor denoiser_forward(const DenoiserModel& model, const Tensor& x_noisy, double sigma, const Tensor& condition,
                        bool use_ema) {
  if (x_noisy.rank() == 0) throw InvalidArgument("denoiser: x_noisy must be [B,C,H,W]");
  const std::vector<double> sigmas(x_noisy.dim(0), sigma);
  return denoiser_forward(model, x_noisy, sigmas, condition, use_ema);
}

void DenoiserModel::save(const std::filesystem::path& path) const {
  std::vector<TensorRecord> records;
  std::vector<double> cfg{static_cast<double>(config_.in_channels), static_cast<double>(config_.out_channels),
                          static_cast<double>(config_.base_width), static_cast<double>(config_.groups),
                          static_cast<double>(config_.fourier_bands)};
  for (int m : config_.channel_multipliers) cfg.push_back(m);
  records.push_back({"meta.config", {cfg.size()}, cfg});
  records.push_back({"meta.schedule",
                     {5},
                     {schedule_.sigma_min(), schedule_.sigma_max(), schedule_.sigma_data(),
                      static_cast<double>(schedule_.n_levels()), schedule_.rho()}});
  for (const auto& [name, t] : params_) records.push_back({"theta." + name, t.shape(), {t.data().begin(), t.data().end()}});
  for (const auto& [name, t] : ema_) records.push_back({"ema." + name, t.shape(), {t.data().begin(), t.data().end()}});
  write_checkpoint(path, records);
}

DenoiserModel DenoiserModel::load(const std::filesystem::path& path) {
  const auto records = read_checkpoint(path);
  if (records.size() < 2 || records[0].name != "meta.config" || records[1].name != "meta.schedule" ||
      records[0].values.size() < 6 || records[1].values.size() != 5) {
    throw IoError("checkpoint lacks model metadata: " + path.string());
  }
  const auto& c = records[0].values;
  DenoiserConfig cfg;
  cfg.in_channels = static_cast<int>(c[0]);
  cfg.out_channels = static_cast<int>(c[1]);
  cfg.base_width = static_cast<int>(c[2]);
  cfg.groups = static_cast<int>(c[3]);
  cfg.fourier_bands = static_cast<int>(c[4]);
  cfg.channel_multipliers.assign(c.begin() + 5, c.end());
  const auto& s = records[1].values;
  DenoiserModel model(cfg, NoiseSchedule(s[0], s[1], s[2], static_cast<int>(s[3]), s[4]), 0);

  std::size_t loaded = 0;
  for (std::size_t i = 2; i < records.size(); ++i) {
    const auto& r = records[i];
    ParameterStore* store = nullptr;
    std::string name;
    if (r.name.rfind("theta.", 0) == 0) {
      store = &model.params_;
      name = r.name.substr(6);
    } else if (r.name.rfind("ema.", 0) == 0) {
      store = &model.ema_;
      name = r.name.substr(4);
    } else {
      throw IoError("unexpected checkpoint record '" + r.name + "' in " + path.string());
    }
    if (!store->contains(name)) throw IoError("checkpoint record '" + r.name + "' has no matching parameter");
    auto& t = store->get(name);
    if (t.shape() != r.shape) {
      throw IoError("checkpoint record '" + r.name + "' has shape " + shape_str(r.shape) + ", model expects " +
                    shape_str(t.shape()));
    }
    std::copy(r.values.begin(), r.values.end(), t.mutable_data().begin());
    ++loaded;
  }
  if (loaded != model.params_.size() + model.ema_.size()) {
    throw IoError("checkpoint is missing parameters: " + path.string());
  }
  return model;
}

}  // namespace rcm
