#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rcm/tensor.hpp"

namespace rcm {

/// Named parameters in insertion order. Names are unique; iteration order is
/// exactly the order of `add` calls, so identical construction code yields
/// identical order.
class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  Tensor& add(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  void zero_grad();
  void set_requires_grad(bool flag);
  /// Deep copy: fresh leaves with copied values and the given grad flag.
  ParameterStore clone(bool requires_grad) const;
  /// Overwrites values from `other`; names and shapes must match exactly.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One (name, shape, values) checkpoint record.
struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Checkpoint layout, all integers little-endian:
//   magic "RCMCKPT1" (8 bytes), u64 record count, then per record:
//   u32 name length, name bytes (UTF-8), u32 rank, rank x u64 dims,
//   prod(dims) x f64 values (IEEE-754 binary64, little-endian).
void write_checkpoint(const std::filesystem::path& path, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_checkpoint(const std::filesystem::path& path);

}  // namespace rcm
