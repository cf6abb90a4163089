#pragma once

#include <utility>

#include "rcm/image.hpp"
#include "rcm/sampling.hpp"

namespace rcm {

/// I = R * L with reflectance [3,H,W] in [0,1] and illumination [1,H,W] in (0,1].
struct RetinexPair {
  Tensor reflectance;
  Tensor illumination;
};

constexpr double kDefaultRetinexDelta = 1e-4;

/// Per-channel R_c * L, clamped to [0,1].
ImageRGB reconstruct(const RetinexPair& pair);

/// Max-channel estimator: L = min(1, max_c I_c + delta), R = clamp(I / L, 0, 1).
RetinexPair decompose_maxchannel(const ImageRGB& image, double delta = kDefaultRetinexDelta);

struct ToyDegradation {
  double gamma = 2.0;
  double gain = 0.6;
  double noise_std = 0.02;
};

struct ToyPair {
  ImageRGB low;
  ImageRGB normal;
};

/// Procedural well-lit image (smooth colour gradient plus random rectangles)
/// and its low-light version clamp(gain * I^gamma + N(0, noise_std^2)).
ToyPair make_toy_pair(SeededRng& rng, int size, const ToyDegradation& degradation);

/// The degradation applied by make_toy_pair, exposed for direct use.
ImageRGB degrade(const ImageRGB& normal, const ToyDegradation& degradation, SeededRng& rng);

}  // namespace rcm
