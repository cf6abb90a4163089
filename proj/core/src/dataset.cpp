#include "rcm/dataset.hpp"

#include <algorithm>
#include <map>

#include "rcm/errors.hpp"

namespace rcm {

void PairedDataset::add(std::string name, ImageRGB low, ImageRGB normal, double delta) {
  if (low.height() != normal.height() || low.width() != normal.width()) {
    throw DataError("pair '" + name + "': low and normal images differ in size");
  }
  auto target = decompose_maxchannel(normal, delta);
  samples_.push_back({std::move(name), std::move(low), std::move(normal), std::move(target)});
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

PairedDataset load_paired_dataset(const std::filesystem::path& root, double delta) {
  std::map<std::string, std::filesystem::path> low, normal;
  for (const auto& p : list_images(root / "low")) low[p.filename().string()] = p;
  for (const auto& p : list_images(root / "normal")) normal[p.filename().string()] = p;

  std::string orphans;
  for (const auto& [name, _] : low)
    if (!normal.count(name)) orphans += " low/" + name;
  for (const auto& [name, _] : normal)
    if (!low.count(name)) orphans += " normal/" + name;
  if (!orphans.empty()) throw DataError("unpaired files in " + root.string() + ":" + orphans);
  if (low.empty()) throw DataError("dataset is empty: " + root.string());

  PairedDataset ds;
  for (const auto& [name, path] : low) ds.add(name, read_image(path), read_image(normal.at(name)), delta);
  return ds;
}

}  // namespace rcm
