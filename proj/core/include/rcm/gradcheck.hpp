#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rcm/tensor.hpp"

namespace rcm {

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every element; otherwise a seeded random subset of this many per input.
  std::size_t max_elements_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  /// Norm-wise relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-6) per input.
  std::vector<double> relative_errors;
  double max_relative_error = 0.0;
  std::size_t evaluations = 0;
};

/// Compares reverse-mode gradients of a scalar loss against central differences.
/// `inputs` must be leaves with requires_grad set; `loss` is re-evaluated after
/// each perturbation, so it must read the inputs' current values.
GradCheckResult check_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options = {});

std::string describe(const GradCheckResult& result);

}  // namespace rcm
