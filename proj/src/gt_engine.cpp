#include "gtbo/gt_engine.hpp"

#include <algorithm>

namespace gtbo {

void GTConfig::validate() const {
  if (max_tests < 1) throw ConfigError("gt.max_tests must be at least 1");
  if (particles < 1) throw ConfigError("gt.particles must be at least 1");
  if (!(prior_q > 0.0 && prior_q < 1.0)) throw ConfigError("gt.prior_q must lie in (0,1)");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("gt.eta must lie in (0,1)");
  if (!(c_lower > 0.0 && c_lower < c_upper && c_upper < 1.0))
    throw ConfigError("gt thresholds must satisfy 0 < c_lower < c_upper < 1");
  if (max_batch < 1) throw ConfigError("gt.max_batch must be at least 1");
  if (!(mi_drop > 0.0 && mi_drop <= 1.0)) throw ConfigError("gt.mi_drop must lie in (0,1]");
  if (starts < 1) throw ConfigError("gt.starts must be at least 1");
  if (mc_samples < 1) throw ConfigError("gt.mc_samples must be at least 1");
  if (n_def < 2) throw ConfigError("gt.n_def must be at least 2");
  if (!(variance_floor > 0.0)) throw ConfigError("gt.variance_floor must be positive");
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0)) throw ConfigError("gt.ess_threshold must lie in (0,1]");
  if (!(min_distance > 0.0 && min_distance <= 0.5)) throw ConfigError("gt.min_distance must lie in (0,0.5]");
}

Point make_test_point(const Point& x_def, const DimMask& group, Rng& rng, double min_distance) {
  if (group.dims() != x_def.size()) throw std::invalid_argument("group dimension mismatch");
  Point x = x_def;
  for (auto i : group.indices()) x[i] = draw_far_coordinate(x_def[i], min_distance, rng);
  return x;
}

bool converged(std::span<const double> marginals, double c_lower, double c_upper) {
  return std::all_of(marginals.begin(), marginals.end(),
                     [&](double m) { return m <= c_lower || m >= c_upper; });
}

std::vector<std::size_t> active_set(std::span<const double> marginals, double eta) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < marginals.size(); ++i)
    if (marginals[i] >= eta) out.push_back(i);
  return out;
}

GTResult run_group_testing(const Evaluator& f, const Point& x_def, const GTConfig& config, Rng& rng,
                           const TestObserver& observer) {
  config.validate();
  const std::size_t dims = x_def.size();
  GTResult result;
  result.x_def = x_def;

  const Evaluator logged = [&](std::span<const double> x) {
    try {
      return f(x);
    } catch (const std::exception& e) {
      throw GTEvaluationError(e.what(), result);
    }
  };

  VarianceEstimationOptions vopts;
  vopts.n_def = config.n_def;
  vopts.max_act = config.max_act;
  vopts.variance_floor = config.variance_floor;
  vopts.signed_deviation = config.signed_deviation;
  vopts.min_distance = config.min_distance;
  const auto estimate = estimate_noise_model(logged, x_def, vopts, rng);
  result.probes = estimate.probes;
  result.noise_model = estimate.model;
  const NoiseModel& nm = result.noise_model;

  auto posterior =
      ParticlePosterior::sample_prior(config.particles, std::vector<double>(dims, config.prior_q), rng);
  result.marginal_trajectory.push_back(posterior.marginals());

  SelectionOptions sopts;
  sopts.starts = config.starts;
  sopts.max_batch = config.max_batch;
  sopts.mi_drop = config.mi_drop;
  sopts.mc_samples = config.mc_samples;

  std::size_t tests = 0;
  while (tests < config.max_tests) {
    auto batch = select_batch(posterior, nm, sopts, rng);
    if (batch.empty()) break;
    batch.resize(std::min(batch.size(), config.max_tests - tests));

    for (const auto& pick : batch) {
      TestRecord rec;
      rec.group = pick.group;
      rec.point = make_test_point(x_def, pick.group, rng, config.min_distance);
      try {
        rec.y = f(rec.point);
      } catch (const std::exception& e) {
        result.iterations_used = tests;
        throw GTEvaluationError(e.what(), result);
      }
      rec.z = rec.y - nm.f_def_hat;
      rec.iteration = ++tests;
      posterior.update(rec.group, rec.z, nm);
      result.marginal_trajectory.push_back(posterior.marginals());
      result.records.push_back(std::move(rec));
    }
    // One rejuvenation check per batch.
    posterior.maybe_rejuvenate(nm, rng, config.ess_threshold, config.gibbs_sweeps);
    auto marg = posterior.marginals();
    result.marginal_trajectory.back() = marg;
    if (observer) {
      const std::size_t first = result.records.size() - batch.size();
      for (std::size_t j = first; j < result.records.size(); ++j)
        observer(result.records[j], result.marginal_trajectory[j + 1]);
    }
    if (converged(marg, config.c_lower, config.c_upper)) {
      result.converged = true;
      break;
    }
  }

  result.iterations_used = tests;
  result.active_set = active_set(result.marginal_trajectory.back(), config.eta);
  result.degenerate = result.active_set.empty();
  return result;
}

}  // namespace gtbo
