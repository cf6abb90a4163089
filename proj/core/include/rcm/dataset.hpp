#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rcm/retinex.hpp"

namespace rcm {

/// One training example: the low-light condition and the decomposed target.
struct PairedSample {
  std::string name;
  ImageRGB low;
  ImageRGB normal;
  RetinexPair target;
};

class PairedDataset {
 public:
  PairedDataset() = default;
  void add(std::string name, ImageRGB low, ImageRGB normal, double delta = kDefaultRetinexDelta);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const PairedSample& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

 private:
  std::vector<PairedSample> samples_;
};

/// Image files directly inside `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Loads `root/low/*` against `root/normal/*` by filename. Throws DataError
/// listing every orphan when the two sides do not pair up exactly.
PairedDataset load_paired_dataset(const std::filesystem::path& root, double delta = kDefaultRetinexDelta);

}  // namespace rcm
