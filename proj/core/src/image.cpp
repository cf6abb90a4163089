#include "rcm/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace rcm {

ImageRGB::ImageRGB(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 3 || pixels_.dim(0) != 3) {
    throw InvalidArgument("image: expected [3,H,W], got " + shape_str(pixels_.shape()));
  }
  for (double v : pixels_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("image: value " + std::to_string(v) + " outside [0,1]");
  }
}

ImageRGB ImageRGB::clamped(const Tensor& pixels) {
  std::vector<double> v(pixels.data().begin(), pixels.data().end());
  for (auto& e : v) e = std::clamp(e, 0.0, 1.0);
  return ImageRGB(Tensor::from(pixels.shape(), std::move(v)));
}

ImageRGB ImageRGB::filled(std::size_t height, std::size_t width, double value) {
  return ImageRGB(Tensor::full({3, height, width}, value));
}

namespace {

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string lower_ext(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

ImageRGB from_interleaved(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& rgb) {
  std::vector<double> v(3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) v[(c * h + y) * w + x] = rgb[(y * w + x) * 3 + c] / 255.0;
  return ImageRGB(Tensor::from({3, h, w}, std::move(v)));
}

std::vector<std::uint8_t> to_interleaved(const ImageRGB& image) {
  const std::size_t h = image.height(), w = image.width();
  std::vector<std::uint8_t> rgb(3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) rgb[(y * w + x) * 3 + c] = quantize(image.at(c, y, x));
  return rgb;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

bool is_image_file(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  return ext == ".png" || ext == ".ppm";
}

ImageRGB read_image(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  throw IoError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const ImageRGB& image) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".ppm") return write_ppm(path, image);
  throw IoError("unsupported image format: " + path.string());
}

ImageRGB read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return from_interleaved(img.height, img.width, rgb);
}

void write_png(const std::filesystem::path& path, const ImageRGB& image) {
  auto rgb = to_interleaved(image);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string magic;
  is >> magic;
  auto next_int = [&]() {
    is >> std::ws;
    while (is.peek() == '#') {
      std::string comment;
      std::getline(is, comment);
      is >> std::ws;
    }
    long v = -1;
    is >> v;
    return v;
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
    throw IoError("unsupported PPM (need binary P6, maxval 255): " + path.string());
  }
  is.get();  // single whitespace before the raster
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3 * w * h));
  if (!is.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()))) {
    throw IoError("truncated PPM: " + path.string());
  }
  return from_interleaved(static_cast<std::size_t>(h), static_cast<std::size_t>(w), rgb);
}

void write_ppm(const std::filesystem::path& path, const ImageRGB& image) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  auto rgb = to_interleaved(image);
  std::fprintf(f.get(), "P6\n%zu %zu\n255\n", image.width(), image.height());
  if (std::fwrite(rgb.data(), 1, rgb.size(), f.get()) != rgb.size()) throw IoError("short write: " + path.string());
}

}  // namespace rcm
