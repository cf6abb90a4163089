#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "rcm/errors.hpp"

namespace rcm {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage. Vectorized kernels peel loops by alignment, so a
/// fixed alignment keeps results bit-identical across runs and addresses.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct GradNode;
struct TensorImpl;
}  // namespace detail

/// Dense row-major float64 tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage. Results of
/// differentiable ops record a node pointing at their inputs whenever grad
/// mode is enabled and at least one input requires grad; the graph lives as
/// long as the output handle does.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  bool defined() const { return impl_ != nullptr; }

  std::span<const double> data() const;
  /// Mutable access to values. Only meaningful on leaves; mutating a tensor that
  /// feeds a recorded graph invalidates that graph's saved state.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// New leaf sharing no graph history; values are copied.
  Tensor detach() const;
  Tensor clone() const;

  /// Run reverse-mode accumulation from this scalar.
  void backward() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Internal plumbing for op implementations.
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_mode_enabled();

/// Keeps freed tensor buffers in the heap instead of returning them to the OS.
/// Training allocates and frees many same-sized buffers per step; call once at startup.
void tune_allocator();

namespace detail {

struct TensorImpl {
  Shape shape;
  Buffer data;
  Buffer grad;
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;
};

/// Backward rule of one op. `inputs` are the op's tensor arguments; the rule
/// receives the output gradient and writes into `grad_of(i)` for each input
/// that requires grad (the span is empty otherwise).
struct GradNode {
  std::vector<Tensor> inputs;
  std::function<void(GradNode&, std::span<const double>)> backward;

  std::span<double> grad_of(std::size_t i);
};

/// Builds an op result: attaches a node iff grad mode is on and an input requires grad.
Tensor make_tensor(Shape shape, Buffer values, bool requires_grad = false);

Tensor make_result(Shape shape, Buffer values, std::vector<Tensor> inputs,
                   std::function<void(GradNode&, std::span<const double>)> backward);

}  // namespace detail
}  // namespace rcm
