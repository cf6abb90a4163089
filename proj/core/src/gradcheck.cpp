#include "rcm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rcm/sampling.hpp"

namespace rcm {

GradCheckResult check_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options) {
  for (const auto& t : inputs) {
    if (!t.requires_grad() || !t.is_leaf()) throw InvalidArgument("check_gradients: inputs must be grad-tracking leaves");
  }
  GradCheckResult result;
  for (auto t : inputs) t.zero_grad();
  loss().backward();
  ++result.evaluations;

  SeededRng rng(options.seed);
  for (auto t : inputs) {
    const std::size_t n = t.numel();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_elements_per_input > 0 && n > options.max_elements_per_input) {
      // Partial Fisher-Yates for a reproducible subset.
      for (std::size_t i = 0; i < options.max_elements_per_input; ++i) {
        std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
      }
      idx.resize(options.max_elements_per_input);
    }
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    NoGradGuard guard;
    for (auto i : idx) {
      auto v = t.mutable_data();
      const double orig = v[i];
      v[i] = orig + options.step;
      const double up = loss().item();
      v[i] = orig - options.step;
      const double down = loss().item();
      v[i] = orig;
      result.evaluations += 2;
      const double numeric = (up - down) / (2.0 * options.step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::max(std::sqrt(std::max(a2, n2)), 1e-6);
    const double err = std::sqrt(diff2) / denom;
    result.relative_errors.push_back(err);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

std::string describe(const GradCheckResult& result) {
  std::ostringstream os;
  os << "max_rel_err=" << result.max_relative_error << " per_input=[";
  for (std::size_t i = 0; i < result.relative_errors.size(); ++i) {
    os << (i ? "," : "") << result.relative_errors[i];
  }
  os << "] evals=" << result.evaluations;
  return os.str();
}

}  // namespace rcm
