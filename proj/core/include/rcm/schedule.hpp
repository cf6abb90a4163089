#pragma once

#include <vector>

#include "rcm/tensor.hpp"

namespace rcm {

struct Preconditioning {
  double c_skip;
  double c_out;
  double c_in;
};

/// Noise-scale range and the preconditioning that pins f(x, epsilon) = x.
///
/// The boundary time epsilon is identified with sigma_min. Levels are indexed
/// two ways: `sigma_grid()` runs from sigma_max down to sigma_min, while
/// `level_sigma(n)` counts upward from the boundary so that a larger index
/// always means more noise.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(double sigma_min, double sigma_max, double sigma_data, int n_levels, double rho = 7.0);

  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  double sigma_data() const { return sigma_data_; }
  double epsilon() const { return sigma_min_; }
  int n_levels() const { return n_levels_; }
  double rho() const { return rho_; }

  Preconditioning precondition(double sigma) const;
  std::vector<double> sigma_grid() const;
  double level_sigma(int n) const;
  double snr_weight(double sigma) const;

 private:
  void validate() const;

  double sigma_min_ = 0.002;
  double sigma_max_ = 80.0;
  double sigma_data_ = 0.5;
  int n_levels_ = 10;
  double rho_ = 7.0;
};

/// x0 + sigma * eps.
Tensor add_noise(const Tensor& x0, double sigma, const Tensor& eps);

/// Per-sample noising: sample b gets x0[b] + sigmas[b] * eps[b].
Tensor add_noise(const Tensor& x0, std::span<const double> sigmas, const Tensor& eps);

/// sqrt((1 - alphabar) / alphabar), the variance-exploding scale of a DDPM alphabar.
double sigma_from_alphabar(double alphabar);

}  // namespace rcm
