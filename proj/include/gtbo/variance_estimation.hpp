#pragma once

#include <cstddef>
#include <vector>

#include "gtbo/common.hpp"

namespace gtbo {

/// Likelihood parameters of the test statistic: differences from the default
/// value are N(0, sigma_n_sq) for groups without active dimensions and
/// N(0, sigma_sq) otherwise.
struct NoiseModel {
  double f_def_hat = 0.0;
  double sigma_n_sq = 1.0;
  double sigma_sq = 1.0;
  std::size_t n_def = 0;
  std::size_t max_act = 0;
};

/// One evaluation made while estimating the noise model.
struct Probe {
  enum class Kind { Default, Bin };
  Kind kind = Kind::Default;
  Point point;
  double y = 0.0;
  /// Dimensions perturbed (empty for default replicates).
  std::vector<std::size_t> bin;
};

struct VarianceEstimationOptions {
  std::size_t n_def = 10;
  /// 0 selects floor(sqrt(D)).
  std::size_t max_act = 0;
  double variance_floor = 1e-12;
  /// Use the variance of the signed deviations y_bin - f_def_hat instead of
  /// their absolute values.
  bool signed_deviation = true;
  /// Minimal distance of a perturbed coordinate from its default value.
  double min_distance = 0.4;
};

struct VarianceEstimate {
  NoiseModel model;
  std::vector<Probe> probes;
};

/// Number of bins used for the probe evaluations: 3 * floor(sqrt(D)).
std::size_t bin_count(std::size_t dims);

/// Unbiased sample variance.
double sample_variance(std::span<const double> values);

/// Draws a coordinate uniformly from [0,1] until it lies at least min_distance
/// away from center.
double draw_far_coordinate(double center, double min_distance, Rng& rng);

/// Estimates f(x_def), noise variance, and signal variance from default
/// replicates and binned perturbation probes.
VarianceEstimate estimate_noise_model(const Evaluator& f, const Point& x_def,
                                      const VarianceEstimationOptions& options, Rng& rng);

}  // namespace gtbo
