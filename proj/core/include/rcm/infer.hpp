#pragma once

#include "rcm/net.hpp"
#include "rcm/retinex.hpp"

namespace rcm {

struct EnhanceResult {
  ImageRGB enhanced;
  Tensor reflectance_hat;   // [3,H,W], clamped to [0,1]
  Tensor illumination_hat;  // [1,H,W], clamped to [delta,1]
  double wall_time_seconds = 0.0;
};

/// One evaluation of each component model at sigma_max from pure noise
/// sigma_max * eps, conditioned on `low`. Draws eps_R then eps_L from `rng`.
EnhanceResult one_step_enhance(const DenoiserModel& reflectance, const DenoiserModel& illumination,
                               const ImageRGB& low, SeededRng& rng, bool use_ema = true);

/// 10 log10(1 / MSE) for [0,1] images, capped at 99 dB.
double psnr(const ImageRGB& a, const ImageRGB& b);
/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, valid region), averaged over channels.
double ssim(const ImageRGB& a, const ImageRGB& b);
double mae(const ImageRGB& a, const ImageRGB& b);

constexpr double kPsnrCapDb = 99.0;

}  // namespace rcm
