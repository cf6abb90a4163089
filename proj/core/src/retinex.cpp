#include "rcm/retinex.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rcm {

ImageRGB reconstruct(const RetinexPair& pair) {
  const auto& r = pair.reflectance;
  const auto& l = pair.illumination;
  if (r.rank() != 3 || l.rank() != 3 || r.dim(0) != 3 || l.dim(0) != 1 || r.dim(1) != l.dim(1) ||
      r.dim(2) != l.dim(2)) {
    throw InvalidArgument("reconstruct: reflectance " + shape_str(r.shape()) + " and illumination " +
                          shape_str(l.shape()) + " are incompatible");
  }
  const std::size_t plane = r.dim(1) * r.dim(2);
  auto rv = r.data(), lv = l.data();
  std::vector<double> out(3 * plane);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = std::clamp(rv[c * plane + i] * lv[i], 0.0, 1.0);
  return ImageRGB(Tensor::from(r.shape(), std::move(out)));
}

RetinexPair decompose_maxchannel(const ImageRGB& image, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("decompose_maxchannel: delta must be positive");
  const std::size_t h = image.height(), w = image.width(), plane = h * w;
  auto v = image.data();
  std::vector<double> l(plane), r(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    l[i] = std::min(1.0, std::max({v[i], v[plane + i], v[2 * plane + i]}) + delta);
    for (std::size_t c = 0; c < 3; ++c) r[c * plane + i] = std::clamp(v[c * plane + i] / l[i], 0.0, 1.0);
  }
  return {Tensor::from({3, h, w}, std::move(r)), Tensor::from({1, h, w}, std::move(l))};
}

ImageRGB degrade(const ImageRGB& normal, const ToyDegradation& d, SeededRng& rng) {
  if (!(d.gamma >= 1.0)) throw InvalidArgument("degrade: gamma must be >= 1");
  if (!(d.gain > 0.0 && d.gain <= 1.0)) throw InvalidArgument("degrade: gain must lie in (0, 1]");
  if (!(d.noise_std >= 0.0)) throw InvalidArgument("degrade: noise_std must be >= 0");
  std::vector<double> out(normal.data().begin(), normal.data().end());
  for (auto& e : out) {
    e = d.gain * std::pow(e, d.gamma);
    if (d.noise_std > 0.0) e += d.noise_std * rng.normal();
    e = std::clamp(e, 0.0, 1.0);
  }
  return ImageRGB(Tensor::from(normal.pixels().shape(), std::move(out)));
}

ToyPair make_toy_pair(SeededRng& rng, int size, const ToyDegradation& degradation) {
  if (size < 8) throw InvalidArgument("make_toy_pair: size must be >= 8, got " + std::to_string(size));
  const auto n = static_cast<std::size_t>(size);
  const double inv = 1.0 / static_cast<double>(size - 1);
  auto in_range = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  // Smooth background: per-channel bilinear ramp kept inside [0.05, 0.95].
  std::vector<double> img(3 * n * n);
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = in_range(0.2, 0.8);
    const double gx = in_range(-0.3, 0.3), gy = in_range(-0.3, 0.3);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double u = static_cast<double>(x) * inv - 0.5, v = static_cast<double>(y) * inv - 0.5;
        img[(c * n + y) * n + x] = std::clamp(base + gx * u + gy * v, 0.05, 0.95);
      }
  }
  // Random axis-aligned rectangles with flat colours, alpha-blended.
  const int rects = 2 + static_cast<int>(rng.uniform_int(4));
  for (int k = 0; k < rects; ++k) {
    const auto x0 = rng.uniform_int(n - 2), y0 = rng.uniform_int(n - 2);
    const auto x1 = x0 + 2 + rng.uniform_int(n - x0 - 1), y1 = y0 + 2 + rng.uniform_int(n - y0 - 1);
    const double color[3] = {in_range(0.05, 0.95), in_range(0.05, 0.95), in_range(0.05, 0.95)};
    const double alpha = in_range(0.6, 1.0);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = y0; y < std::min<std::size_t>(y1, n); ++y)
        for (std::size_t x = x0; x < std::min<std::size_t>(x1, n); ++x) {
          auto& p = img[(c * n + y) * n + x];
          p = (1.0 - alpha) * p + alpha * color[c];
        }
  }
  ImageRGB normal(Tensor::from({3, n, n}, std::move(img)));
  ImageRGB low = degrade(normal, degradation, rng);
  return {std::move(low), std::move(normal)};
}

}  // namespace rcm
