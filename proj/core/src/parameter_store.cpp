#include "rcm/parameter_store.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "rcm/errors.hpp"

namespace rcm {

Tensor& ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw InvalidArgument("parameter store: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("parameter store: no parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& ParameterStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterStore&>(*this).get(name));
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

void ParameterStore::set_requires_grad(bool flag) {
  for (auto& [_, t] : entries_) t.set_requires_grad(flag);
}

ParameterStore ParameterStore::clone(bool requires_grad) const {
  ParameterStore out;
  for (const auto& [name, t] : entries_) {
    out.add(name, Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), requires_grad));
  }
  return out;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) throw InvalidArgument("parameter store: size mismatch on copy");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& [name, t] = entries_[i];
    const auto& [oname, ot] = other.entries_[i];
    if (name != oname || t.shape() != ot.shape()) {
      throw InvalidArgument("parameter store: '" + name + "' " + shape_str(t.shape()) + " cannot take '" + oname +
                            "' " + shape_str(ot.shape()));
    }
    std::copy(ot.data().begin(), ot.data().end(), t.mutable_data().begin());
  }
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'C', 'M', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ofstream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IoError("checkpoint truncated: " + path.string());
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<TensorRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(os, records.size());
  for (const auto& r : records) {
    if (shape_numel(r.shape) != r.values.size()) {
      throw InvalidArgument("checkpoint record '" + r.name + "' shape does not match its values");
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(r.values.data()), static_cast<std::streamsize>(r.values.size() * 8));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<TensorRecord> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a checkpoint file: " + path.string());
  const auto count = take<std::uint64_t>(is, path);
  std::vector<TensorRecord> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 16)));
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord r;
    r.name.resize(take<std::uint32_t>(is, path));
    if (!is.read(r.name.data(), static_cast<std::streamsize>(r.name.size()))) throw IoError("checkpoint truncated: " + path.string());
    const auto rank = take<std::uint32_t>(is, path);
    for (std::uint32_t d = 0; d < rank; ++d) r.shape.push_back(take<std::uint64_t>(is, path));
    r.values.resize(shape_numel(r.shape));
    if (!is.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(r.values.size() * 8))) {
      throw IoError("checkpoint truncated: " + path.string());
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace rcm
