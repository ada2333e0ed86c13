#include "gtbo/particles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

namespace gtbo {

double log_normal_density(double z, double variance) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + z * z / variance);
}

ParticlePosterior::ParticlePosterior(std::size_t particles, std::size_t dims,
                                     std::vector<double> prior_q)
    : particles_(particles),
      dims_(dims),
      words_((dims + 63) / 64),
      bits_(particles * ((dims + 63) / 64), 0),
      log_weights_(particles, 0.0),
      weights_(particles, particles ? 1.0 / static_cast<double>(particles) : 0.0),
      prior_q_(std::move(prior_q)) {
  if (particles_ == 0) throw ConfigError("particle count must be positive");
  if (prior_q_.size() != dims_) throw ConfigError("prior_q length must equal the dimension count");
  prior_logit_.reserve(dims_);
  for (double q : prior_q_) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("prior activity probabilities must lie in (0,1)");
    prior_logit_.push_back(std::log(q) - std::log1p(-q));
  }
}

ParticlePosterior ParticlePosterior::sample_prior(std::size_t particles, std::vector<double> prior_q,
                                                  Rng& rng) {
  const std::size_t dims = prior_q.size();
  ParticlePosterior ps(particles, dims, std::move(prior_q));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < particles; ++k) {
    for (std::size_t i = 0; i < dims; ++i) {
      if (u(rng) < ps.prior_q_[i]) ps.bits_[k * ps.words_ + (i >> 6)] |= std::uint64_t{1} << (i & 63);
    }
  }
  return ps;
}

ParticlePosterior ParticlePosterior::from_states(const std::vector<DimMask>& states,
                                                 std::vector<double> weights,
                                                 std::vector<double> prior_q) {
  if (states.size() != weights.size()) throw std::invalid_argument("one weight per state required");
  const std::size_t dims = prior_q.size();
  ParticlePosterior ps(states.size(), dims, std::move(prior_q));
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k].dims() != ps.dims_) throw std::invalid_argument("state dimension mismatch");
    std::copy(states[k].words().begin(), states[k].words().end(), ps.bits_.begin() + k * ps.words_);
    if (!(weights[k] >= 0.0)) throw std::invalid_argument("weights must be non-negative");
    ps.log_weights_[k] = std::log(weights[k]);
  }
  ps.normalize();
  return ps;
}

DimMask ParticlePosterior::particle(std::size_t k) const {
  DimMask m(dims_);
  for (std::size_t i = 0; i < dims_; ++i)
    if (active(k, i)) m.set(i);
  return m;
}

bool ParticlePosterior::hits(std::size_t k, const DimMask& group) const {
  const auto g = group.words();
  const std::uint64_t* p = bits_.data() + k * words_;
  for (std::size_t w = 0; w < words_; ++w)
    if (p[w] & g[w]) return true;
  return false;
}

double ParticlePosterior::group_active_probability(const DimMask& group) const {
  if (group.dims() != dims_) throw std::invalid_argument("group dimension mismatch");
  double p = 0.0;
  for (std::size_t k = 0; k < particles_; ++k)
    if (hits(k, group)) p += weights_[k];
  return std::clamp(p, 0.0, 1.0);
}

std::vector<double> ParticlePosterior::marginals() const {
  std::vector<double> m(dims_, 0.0);
  for (std::size_t k = 0; k < particles_; ++k) {
    const std::uint64_t* p = bits_.data() + k * words_;
    for (std::size_t w = 0; w < words_; ++w) {
      auto bits = p[w];
      while (bits) {
        m[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))] += weights_[k];
        bits &= bits - 1;
      }
    }
  }
  for (auto& v : m) v = std::clamp(v, 0.0, 1.0);
  return m;
}

double ParticlePosterior::effective_sample_size() const {
  double s = 0.0;
  for (double w : weights_) s += w * w;
  return 1.0 / s;
}

void ParticlePosterior::normalize() {
  const double mx = *std::max_element(log_weights_.begin(), log_weights_.end());
  if (!std::isfinite(mx)) throw NumericDegeneracy("all particle weights degenerated");
  double total = 0.0;
  for (std::size_t k = 0; k < particles_; ++k) {
    log_weights_[k] -= mx;
    weights_[k] = std::exp(log_weights_[k]);
    total += weights_[k];
  }
  const double log_total = std::log(total);
  for (std::size_t k = 0; k < particles_; ++k) {
    weights_[k] /= total;
    log_weights_[k] -= log_total;
  }
}

void ParticlePosterior::update(const DimMask& group, double z, const NoiseModel& nm) {
  if (group.dims() != dims_) throw std::invalid_argument("group dimension mismatch");
  const double ll_active = log_normal_density(z, nm.sigma_sq);
  const double ll_inactive = log_normal_density(z, nm.sigma_n_sq);
  if (!std::isfinite(ll_active) && !std::isfinite(ll_inactive))
    throw NumericDegeneracy("observation has zero likelihood under both hypotheses");
  std::vector<double> next(log_weights_);
  for (std::size_t k = 0; k < particles_; ++k) next[k] += hits(k, group) ? ll_active : ll_inactive;
  const double mx = *std::max_element(next.begin(), next.end());
  // Leave the posterior untouched rather than continue from a broken state.
  if (!std::isfinite(mx)) throw NumericDegeneracy("all particle weights degenerated");
  log_weights_.swap(next);
  history_.push_back({group, z});
  normalize();
}

std::size_t ParticlePosterior::sample_index(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double target = u(rng);
  for (std::size_t k = 0; k < particles_; ++k) {
    target -= weights_[k];
    if (target < 0.0) return k;
  }
  return particles_ - 1;
}

void ParticlePosterior::gibbs_sweep(std::size_t k, const std::vector<double>& llr,
                                    const std::vector<std::vector<std::uint32_t>>& tests_of_dim,
                                    std::vector<std::int32_t>& counts, Rng& rng) {
  std::uint64_t* p = bits_.data() + k * words_;
  for (std::size_t t = 0; t < history_.size(); ++t) {
    const auto g = history_[t].group.words();
    std::int32_t c = 0;
    for (std::size_t w = 0; w < words_; ++w) c += std::popcount(p[w] & g[w]);
    counts[t] = c;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < dims_; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    const bool on = p[i >> 6] & bit;
    // Log-odds of xi_i = 1 against xi_i = 0 with every other coordinate fixed:
    // only tests with no other active member change their hit status.
    double log_odds = prior_logit_[i];
    for (auto t : tests_of_dim[i]) {
      if (counts[t] - (on ? 1 : 0) == 0) log_odds += llr[t];
    }
    const double p_on = log_odds >= 0.0 ? 1.0 / (1.0 + std::exp(-log_odds))
                                        : std::exp(log_odds) / (1.0 + std::exp(log_odds));
    const bool next = u(rng) < p_on;
    if (next != on) {
      p[i >> 6] ^= bit;
      const std::int32_t delta = next ? 1 : -1;
      for (auto t : tests_of_dim[i]) counts[t] += delta;
    }
  }
}

void ParticlePosterior::resample_move(const NoiseModel& nm, Rng& rng, std::size_t sweeps) {
  if (history_.empty()) return;

  // Systematic resampling.
  std::vector<std::uint64_t> next(bits_.size());
  std::uniform_real_distribution<double> u(0.0, 1.0 / static_cast<double>(particles_));
  const double step = 1.0 / static_cast<double>(particles_);
  double pointer = u(rng);
  double cumulative = weights_[0];
  std::size_t src = 0;
  for (std::size_t k = 0; k < particles_; ++k) {
    while (pointer > cumulative && src + 1 < particles_) cumulative += weights_[++src];
    std::copy_n(bits_.begin() + src * words_, words_, next.begin() + k * words_);
    pointer += step;
  }
  bits_.swap(next);
  std::fill(log_weights_.begin(), log_weights_.end(), -std::log(static_cast<double>(particles_)));
  std::fill(weights_.begin(), weights_.end(), 1.0 / static_cast<double>(particles_));

  std::vector<double> llr(history_.size());
  std::vector<std::vector<std::uint32_t>> tests_of_dim(dims_);
  for (std::size_t t = 0; t < history_.size(); ++t) {
    llr[t] = log_normal_density(history_[t].z, nm.sigma_sq) -
             log_normal_density(history_[t].z, nm.sigma_n_sq);
    for (auto i : history_[t].group.indices()) tests_of_dim[i].push_back(static_cast<std::uint32_t>(t));
  }
  std::vector<std::int32_t> counts(history_.size());
  for (std::size_t s = 0; s < sweeps; ++s)
    for (std::size_t k = 0; k < particles_; ++k) gibbs_sweep(k, llr, tests_of_dim, counts, rng);
}

bool ParticlePosterior::maybe_rejuvenate(const NoiseModel& nm, Rng& rng, double threshold,
                                         std::size_t sweeps) {
  if (history_.empty() || effective_sample_size() >= threshold * static_cast<double>(particles_))
    return false;
  resample_move(nm, rng, sweeps);
  return true;
}

}  // namespace gtbo
