#include "gtbo/information.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gtbo {

namespace {

constexpr double kLog2PiE = 2.8378770664093453;  // log(2 pi e)

double gaussian_entropy(double variance) { return 0.5 * (kLog2PiE + std::log(variance)); }

// log of the mixture density at z.
double log_mixture_density(double z, double p, double sigma_n_sq, double sigma_sq) {
  const double la = p > 0.0 ? std::log(p) - 0.5 * (std::log(2.0 * std::numbers::pi * sigma_sq) +
                                                   z * z / sigma_sq)
                            : -INFINITY;
  const double li = p < 1.0 ? std::log1p(-p) - 0.5 * (std::log(2.0 * std::numbers::pi * sigma_n_sq) +
                                                       z * z / sigma_n_sq)
                            : -INFINITY;
  const double mx = std::max(la, li);
  return mx + std::log(std::exp(la - mx) + std::exp(li - mx));
}

double conditional_entropy(double p, double sigma_n_sq, double sigma_sq) {
  return (1.0 - p) * gaussian_entropy(sigma_n_sq) + p * gaussian_entropy(sigma_sq);
}

double entropy_from_draws(std::span<const double> normals, std::span<const double> uniforms,
                          double p, double sigma_n_sq, double sigma_sq) {
  const double sa = std::sqrt(sigma_sq);
  const double si = std::sqrt(sigma_n_sq);
  double acc = 0.0;
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double z = normals[i] * (uniforms[i] < p ? sa : si);
    acc -= log_mixture_density(z, p, sigma_n_sq, sigma_sq);
  }
  return acc / static_cast<double>(normals.size());
}

}  // namespace

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

double gmm_entropy_mc(double p_active, double sigma_n_sq, double sigma_sq, std::size_t samples,
                      Rng& rng) {
  if (!(sigma_n_sq > 0.0 && sigma_sq > 0.0)) throw std::invalid_argument("variances must be positive");
  if (!(p_active >= 0.0 && p_active <= 1.0)) throw std::invalid_argument("p_active must lie in [0,1]");
  if (samples == 0) throw std::invalid_argument("need at least one Monte-Carlo sample");
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> normals(samples), uniforms(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    uniforms[i] = u01(rng);
    normals[i] = n01(rng);
  }
  return entropy_from_draws(normals, uniforms, p_active, sigma_n_sq, sigma_sq);
}

MIEstimate mutual_information(double p_active, const NoiseModel& nm, std::size_t samples, Rng& rng) {
  MIEstimate out;
  out.mc_samples = samples;
  out.p_active = p_active;
  const double h = gmm_entropy_mc(p_active, nm.sigma_n_sq, nm.sigma_sq, samples, rng);
  // Identical components carry no information regardless of MC error.
  out.raw = nm.sigma_sq == nm.sigma_n_sq ? 0.0
                                         : h - conditional_entropy(p_active, nm.sigma_n_sq, nm.sigma_sq);
  out.value = std::max(out.raw, 0.0);
  return out;
}

MutualInformation::MutualInformation(const NoiseModel& nm, std::size_t samples, Rng& rng)
    : sigma_n_sq_(nm.sigma_n_sq), sigma_sq_(nm.sigma_sq), normals_(samples), uniforms_(samples) {
  if (samples == 0) throw std::invalid_argument("need at least one Monte-Carlo sample");
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Stratified component draws: the share of draws below p is within 1/N of p.
  const double n = static_cast<double>(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    uniforms_[i] = (static_cast<double>(i) + u01(rng)) / n;
    normals_[i] = n01(rng);
  }
}

double MutualInformation::operator()(double p_active) const {
  p_active = std::clamp(p_active, 0.0, 1.0);
  if (auto it = cache_.find(p_active); it != cache_.end()) return it->second;
  const double v = compute(p_active);
  cache_.emplace(p_active, v);
  return v;
}

double MutualInformation::compute(double p) const {
  if (sigma_sq_ == sigma_n_sq_ || p <= 0.0 || p >= 1.0) return 0.0;
  // Same draws as gmm_entropy_mc, but the conditional entropy is estimated on
  // those draws too, so the component-entropy MC errors cancel.
  const double sa = std::sqrt(sigma_sq_);
  const double si = std::sqrt(sigma_n_sq_);
  const double log_norm_a = -0.5 * std::log(2.0 * std::numbers::pi * sigma_sq_);
  const double log_norm_i = -0.5 * std::log(2.0 * std::numbers::pi * sigma_n_sq_);
  double acc = 0.0;
  for (std::size_t i = 0; i < normals_.size(); ++i) {
    const bool is_active = uniforms_[i] < p;
    const double e = normals_[i];
    const double z = e * (is_active ? sa : si);
    const double log_cond = (is_active ? log_norm_a : log_norm_i) - 0.5 * e * e;
    acc += log_cond - log_mixture_density(z, p, sigma_n_sq_, sigma_sq_);
  }
  return std::max(acc / static_cast<double>(normals_.size()), 0.0);
}

}  // namespace gtbo
