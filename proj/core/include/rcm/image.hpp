#pragma once

#include <filesystem>

#include "rcm/tensor.hpp"

namespace rcm {

/// Channel-first RGB image [3,H,W] with every value in [0,1].
class ImageRGB {
 public:
  ImageRGB() = default;
  /// Validates shape and range; throws InvalidArgument otherwise.
  explicit ImageRGB(Tensor pixels);
  /// Clamps values into [0,1] instead of validating the range.
  static ImageRGB clamped(const Tensor& pixels);
  static ImageRGB filled(std::size_t height, std::size_t width, double value);

  std::size_t height() const { return pixels_.dim(1); }
  std::size_t width() const { return pixels_.dim(2); }
  const Tensor& pixels() const { return pixels_; }
  std::span<const double> data() const { return pixels_.data(); }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return data()[(c * height() + y) * width() + x]; }

 private:
  Tensor pixels_;
};

/// Reads an 8-bit RGB image; `.png` goes through libpng, `.ppm` is binary P6.
ImageRGB read_image(const std::filesystem::path& path);
/// Writes 8-bit RGB with round-to-nearest quantization of [0,1] values.
void write_image(const std::filesystem::path& path, const ImageRGB& image);

ImageRGB read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageRGB& image);
ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRGB& image);

bool is_image_file(const std::filesystem::path& path);

}  // namespace rcm
