#include "rcm/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rcm {

namespace {
thread_local int no_grad_depth = 0;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }
bool grad_mode_enabled() { return no_grad_depth == 0; }

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return detail::make_tensor(std::move(shape), Buffer(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return detail::make_tensor(std::move(shape), Buffer(values.begin(), values.end()), requires_grad);
}

Tensor detail::make_tensor(Shape shape, Buffer values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw InvalidArgument("tensor: shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                          " elements but " + std::to_string(values.size()) + " values were given");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw InvalidArgument("tensor: axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape()));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw InvalidArgument("tensor: item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw InvalidArgument("tensor: requires_grad can only be set on leaves");
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return impl_->node == nullptr; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return detail::make_tensor(impl_->shape, impl_->data, false); }

Tensor Tensor::clone() const { return detail::make_tensor(impl_->shape, impl_->data, impl_->requires_grad); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw InvalidArgument("backward: loss must be a scalar, got shape " + shape_str(shape()));
  }
  // Post-order DFS gives a topological order with inputs before consumers.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node_impl, next] = stack.back();
    const auto* node = node_impl->node.get();
    if (node && next < node->inputs.size()) {
      auto* child = node->inputs[next++].impl().get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node_impl);
    stack.pop_back();
  }

  for (auto* t : order) {
    if (t->node) {
      t->grad.assign(t->data.size(), 0.0);  // interior grads are per-pass
    } else if (t->grad.size() != t->data.size()) {
      t->grad.assign(t->data.size(), 0.0);
    }
  }
  impl_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* t = *it;
    if (t->node) t->node->backward(*t->node, t->grad);
  }
}

namespace detail {

std::span<double> GradNode::grad_of(std::size_t i) {
  auto& impl = *inputs[i].impl();
  if (!impl.requires_grad) return {};
  if (impl.grad.size() != impl.data.size()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

Tensor make_result(Shape shape, Buffer values, std::vector<Tensor> inputs,
                   std::function<void(GradNode&, std::span<const double>)> backward) {
  auto out = make_tensor(std::move(shape), std::move(values));
  if (!grad_mode_enabled()) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<GradNode>();
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
  return out;
}

}  // namespace detail
}  // namespace rcm
