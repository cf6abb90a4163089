#include "rcm/infer.hpp"

#include <algorithm>
#include <chrono>
#include <string>

namespace rcm {

namespace {

Tensor clamp_component(const Tensor& batched, double lo) {
  // [1,C,H,W] -> [C,H,W]
  const Shape shape(batched.shape().begin() + 1, batched.shape().end());
  std::vector<double> v(batched.data().begin(), batched.data().end());
  for (auto& e : v) e = std::clamp(e, lo, 1.0);
  return Tensor::from(shape, std::move(v));
}

Tensor pure_noise(std::size_t channels, std::size_t h, std::size_t w, double sigma, SeededRng& rng) {
  std::vector<double> v(channels * h * w);
  for (auto& e : v) e = sigma * rng.normal();
  return Tensor::from({1, channels, h, w}, std::move(v));
}

}  // namespace

EnhanceResult one_step_enhance(const DenoiserModel& reflectance, const DenoiserModel& illumination,
                               const ImageRGB& low, SeededRng& rng, bool use_ema) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t h = low.height(), w = low.width();
  for (const auto* m : {&reflectance, &illumination}) {
    const auto f = static_cast<std::size_t>(m->config().downsample_factor());
    if (h % f != 0 || w % f != 0) {
      throw InvalidArgument("enhance: image " + std::to_string(h) + "x" + std::to_string(w) +
                            " must be padded to a multiple of " + std::to_string(f) + " in both dimensions");
    }
  }
  NoGradGuard no_grad;
  const auto condition = Tensor::from({1, 3, h, w}, std::vector<double>(low.data().begin(), low.data().end()));
  const double sigma_r = reflectance.schedule().sigma_max();
  const double sigma_l = illumination.schedule().sigma_max();
  const auto noise_r = pure_noise(3, h, w, sigma_r, rng);
  const auto noise_l = pure_noise(1, h, w, sigma_l, rng);

  const auto r_hat = denoiser_forward(reflectance, noise_r, sigma_r, condition, use_ema);
  const auto l_hat = denoiser_forward(illumination, noise_l, sigma_l, condition, use_ema);

  EnhanceResult out;
  out.reflectance_hat = clamp_component(r_hat, 0.0);
  out.illumination_hat = clamp_component(l_hat, kDefaultRetinexDelta);
  out.enhanced = reconstruct({out.reflectance_hat, out.illumination_hat});
  out.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

void require_same(const char* what, const ImageRGB& a, const ImageRGB& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidArgument(std::string(what) + ": image sizes differ (" + std::to_string(a.height()) + "x" +
                          std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                          std::to_string(b.width()) + ")");
  }
}

}  // namespace

double psnr(const ImageRGB& a, const ImageRGB& b) {
  require_same("psnr", a, b);
  auto x = a.data(), y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = s / static_cast<double>(x.size());
  if (mse < 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double mae(const ImageRGB& a, const ImageRGB& b) {
  require_same("mae", a, b);
  auto x = a.data(), y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

double ssim(const ImageRGB& a, const ImageRGB& b) {
  require_same("ssim", a, b);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const std::size_t h = a.height(), w = a.width();
  if (h < kWin || w < kWin) {
    throw InvalidArgument("ssim: images must be at least 11x11, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  double kernel[kWin];
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    kernel[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (auto& k : kernel) k /= ksum;

  const std::size_t oh = h - kWin + 1, ow = w - kWin + 1;
  // Separable valid-mode filter of a single plane.
  auto filter = [&](const std::vector<double>& src) {
    std::vector<double> tmp(h * ow), out(oh * ow);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += kernel[k] * src[y * w + x + k];
        tmp[y * ow + x] = s;
      }
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += kernel[k] * tmp[(y + k) * ow + x];
        out[y * ow + x] = s;
      }
    return out;
  };

  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      x[i] = a.data()[c * h * w + i];
      y[i] = b.data()[c * h * w + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x), my = filter(y), mxx = filter(xx), myy = filter(yy), mxy = filter(xy);
    double acc = 0.0;
    for (std::size_t i = 0; i < oh * ow; ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cxy = mxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + C1) * (2 * cxy + C2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
    }
    total += acc / static_cast<double>(oh * ow);
  }
  return total / 3.0;
}

}  // namespace rcm
