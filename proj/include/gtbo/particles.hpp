#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gtbo/common.hpp"
#include "gtbo/variance_estimation.hpp"

namespace gtbo {

/// log N(z; 0, variance)
double log_normal_density(double z, double variance);

/// A scored test outcome: the group and the observed difference z.
struct Observation {
  DimMask group;
  double z = 0.0;
};

/// Weighted population of binary activity states approximating the posterior
/// over which dimensions are active.
///
/// Weights are kept in log space and renormalized after every mutation, so
/// `weights()` always sums to one. Particles are packed bit vectors.
class ParticlePosterior {
 public:
  /// Samples M particles entrywise from Bernoulli(prior_q[i]); uniform weights.
  static ParticlePosterior sample_prior(std::size_t particles, std::vector<double> prior_q, Rng& rng);

  /// Builds a posterior from explicit states and (unnormalized) weights.
  static ParticlePosterior from_states(const std::vector<DimMask>& states,
                                       std::vector<double> weights, std::vector<double> prior_q);

  std::size_t size() const { return particles_; }
  std::size_t dims() const { return dims_; }
  std::size_t words_per_particle() const { return words_; }

  std::span<const double> weights() const { return weights_; }
  std::span<const double> prior_q() const { return prior_q_; }
  const std::vector<Observation>& history() const { return history_; }

  std::span<const std::uint64_t> particle_words(std::size_t k) const {
    return {bits_.data() + k * words_, words_};
  }
  bool active(std::size_t k, std::size_t i) const {
    return (bits_[k * words_ + (i >> 6)] >> (i & 63)) & 1u;
  }
  DimMask particle(std::size_t k) const;

  /// True if the group shares at least one set bit with particle k.
  bool hits(std::size_t k, const DimMask& group) const;

  /// Weighted fraction of particles with at least one active dimension in the group.
  double group_active_probability(const DimMask& group) const;

  /// Posterior marginal activity probability per dimension.
  std::vector<double> marginals() const;

  double effective_sample_size() const;

  /// Reweights every particle by the likelihood of z under its hit/no-hit
  /// hypothesis and appends (group, z) to the history. Does not rejuvenate.
  /// Throws NumericDegeneracy (state unchanged) if no particle keeps a finite weight.
  void update(const DimMask& group, double z, const NoiseModel& nm);

  /// Systematic resampling to uniform weights followed by `sweeps` Gibbs
  /// sweeps over every coordinate of every particle. No-op on an empty history.
  void resample_move(const NoiseModel& nm, Rng& rng, std::size_t sweeps = 1);

  /// Calls resample_move when ESS < threshold * M. Returns whether it did.
  bool maybe_rejuvenate(const NoiseModel& nm, Rng& rng, double threshold = 0.5,
                        std::size_t sweeps = 1);

  /// Samples a particle index proportionally to the weights.
  std::size_t sample_index(Rng& rng) const;

 private:
  ParticlePosterior(std::size_t particles, std::size_t dims, std::vector<double> prior_q);

  void normalize();
  void gibbs_sweep(std::size_t k, const std::vector<double>& llr,
                   const std::vector<std::vector<std::uint32_t>>& tests_of_dim,
                   std::vector<std::int32_t>& counts, Rng& rng);

  std::size_t particles_ = 0;
  std::size_t dims_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<double> log_weights_;
  std::vector<double> weights_;
  std::vector<double> prior_q_;
  std::vector<double> prior_logit_;
  std::vector<Observation> history_;
};

/// Thrown when every particle weight degenerates (non-finite log weights).
class NumericDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gtbo
