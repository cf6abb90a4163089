#include "rcm/schedule.hpp"

#include <cmath>
#include <string>

#include "rcm/ops.hpp"

namespace rcm {

NoiseSchedule::NoiseSchedule(double sigma_min, double sigma_max, double sigma_data, int n_levels, double rho)
    : sigma_min_(sigma_min), sigma_max_(sigma_max), sigma_data_(sigma_data), n_levels_(n_levels), rho_(rho) {
  validate();
}

void NoiseSchedule::validate() const {
  if (!(sigma_min_ > 0.0 && sigma_min_ < sigma_max_)) {
    throw InvalidArgument("schedule: need 0 < sigma_min < sigma_max, got " + std::to_string(sigma_min_) + ", " +
                          std::to_string(sigma_max_));
  }
  if (!(sigma_data_ > 0.0)) throw InvalidArgument("schedule: sigma_data must be positive");
  if (n_levels_ < 2) throw InvalidArgument("schedule: n_levels must be >= 2");
  if (!(rho_ > 0.0)) throw InvalidArgument("schedule: rho must be positive");
}

Preconditioning NoiseSchedule::precondition(double sigma) const {
  if (!(sigma >= epsilon() && sigma <= sigma_max_)) {
    throw InvalidArgument("precondition: sigma " + std::to_string(sigma) + " outside [" + std::to_string(epsilon()) +
                          ", " + std::to_string(sigma_max_) + "]");
  }
  const double sd2 = sigma_data_ * sigma_data_;
  const double shifted = sigma - epsilon();
  return {
      sd2 / (shifted * shifted + sd2),
      sigma_data_ * shifted / std::sqrt(sd2 + sigma * sigma),
      1.0 / std::sqrt(sigma * sigma + sd2),
  };
}

std::vector<double> NoiseSchedule::sigma_grid() const {
  const double hi = std::pow(sigma_max_, 1.0 / rho_);
  const double lo = std::pow(sigma_min_, 1.0 / rho_);
  std::vector<double> grid(static_cast<std::size_t>(n_levels_));
  for (int i = 0; i < n_levels_; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_levels_ - 1);
    grid[static_cast<std::size_t>(i)] = std::pow(hi + t * (lo - hi), rho_);
  }
  // Pin the endpoints against pow round-off.
  grid.front() = sigma_max_;
  grid.back() = sigma_min_;
  return grid;
}

double NoiseSchedule::level_sigma(int n) const {
  if (n < 0 || n >= n_levels_) {
    throw InvalidArgument("level_sigma: index " + std::to_string(n) + " outside [0, " + std::to_string(n_levels_) + ")");
  }
  return sigma_grid()[static_cast<std::size_t>(n_levels_ - 1 - n)];
}

double NoiseSchedule::snr_weight(double sigma) const {
  if (!(sigma > 0.0)) throw InvalidArgument("snr_weight: sigma must be positive");
  const double r = (sigma_data_ / sigma) * (sigma_data_ / sigma);
  return r / (1.0 + r);
}

Tensor add_noise(const Tensor& x0, double sigma, const Tensor& eps) {
  if (x0.shape() != eps.shape()) {
    throw InvalidArgument("add_noise: x0 " + shape_str(x0.shape()) + " vs eps " + shape_str(eps.shape()));
  }
  return add(x0, scale(eps, sigma));
}

Tensor add_noise(const Tensor& x0, std::span<const double> sigmas, const Tensor& eps) {
  if (x0.shape() != eps.shape()) {
    throw InvalidArgument("add_noise: x0 " + shape_str(x0.shape()) + " vs eps " + shape_str(eps.shape()));
  }
  return add(x0, scale_batch(eps, sigmas));
}

double sigma_from_alphabar(double alphabar) {
  if (!(alphabar > 0.0 && alphabar <= 1.0)) {
    throw InvalidArgument("sigma_from_alphabar: alphabar " + std::to_string(alphabar) + " outside (0, 1]");
  }
  return std::sqrt((1.0 - alphabar) / alphabar);
}

}  // namespace rcm
