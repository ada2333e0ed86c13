#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "gtbo/common.hpp"
#include "gtbo/variance_estimation.hpp"

namespace gtbo {

/// Binary entropy in nats.
double binary_entropy(double p);

/// Monte-Carlo differential entropy (nats) of the zero-mean two-component
/// mixture p*N(0, sigma_sq) + (1-p)*N(0, sigma_n_sq).
double gmm_entropy_mc(double p_active, double sigma_n_sq, double sigma_sq, std::size_t samples,
                      Rng& rng);

struct MIEstimate {
  /// Clamped at zero; used for group selection.
  double value = 0.0;
  /// Unclamped estimate, kept for diagnostics.
  double raw = 0.0;
  std::size_t mc_samples = 0;
  double p_active = 0.0;
};

/// I(xi; Z) = H(Z) - [(1-p) H(N(0, sigma_n^2)) + p H(N(0, sigma^2))].
MIEstimate mutual_information(double p_active, const NoiseModel& nm, std::size_t samples, Rng& rng);

/// Mutual information as a deterministic function of p_active under common
/// random numbers: the same standard normals and component uniforms are used
/// for every query, so candidate groups are compared without independent MC
/// noise. The conditional entropy is estimated on the same draws (a control
/// variate for the closed form), which makes the estimate exactly zero at
/// p in {0, 1}. Results are memoized per p.
class MutualInformation {
 public:
  MutualInformation(const NoiseModel& nm, std::size_t samples, Rng& rng);

  double operator()(double p_active) const;

 private:
  double compute(double p_active) const;

  double sigma_n_sq_;
  double sigma_sq_;
  std::vector<double> normals_;
  std::vector<double> uniforms_;
  mutable std::unordered_map<double, double> cache_;
};

}  // namespace gtbo
