#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gtbo/common.hpp"
#include "gtbo/group_selection.hpp"
#include "gtbo/particles.hpp"
#include "gtbo/variance_estimation.hpp"

namespace gtbo {

struct GTConfig {
  /// Maximum number of group tests (evaluations, not batches).
  std::size_t max_tests = 300;
  std::size_t particles = 10000;
  double prior_q = 0.05;
  double eta = 0.5;
  double c_lower = 5e-3;
  double c_upper = 0.9;
  std::size_t max_batch = 5;
  double mi_drop = 0.01;
  std::size_t starts = 3;
  std::size_t mc_samples = 2048;
  std::size_t n_def = 10;
  /// 0 selects floor(sqrt(D)).
  std::size_t max_act = 0;
  double variance_floor = 1e-12;
  bool signed_deviation = true;
  double ess_threshold = 0.5;
  std::size_t gibbs_sweeps = 1;
  double min_distance = 0.4;

  void validate() const;
};

struct TestRecord {
  DimMask group;
  Point point;
  double y = 0.0;
  double z = 0.0;
  /// 1-based test index.
  std::size_t iteration = 0;
};

struct GTResult {
  /// Row 0 holds the prior marginals, row t the marginals after test t.
  std::vector<std::vector<double>> marginal_trajectory;
  std::vector<std::size_t> active_set;
  std::vector<Probe> probes;
  std::vector<TestRecord> records;
  NoiseModel noise_model;
  Point x_def;
  bool converged = false;
  std::size_t iterations_used = 0;
  /// True when no dimension reached eta.
  bool degenerate = false;

  /// Number of black-box evaluations consumed (probes plus tests).
  std::size_t evaluations() const { return probes.size() + records.size(); }
};

/// x_def with the group's coordinates redrawn uniformly, each at least
/// min_distance from its default value.
Point make_test_point(const Point& x_def, const DimMask& group, Rng& rng, double min_distance = 0.4);

/// Every marginal lies in [0, c_lower] or [c_upper, 1].
bool converged(std::span<const double> marginals, double c_lower, double c_upper);

/// Indices whose marginal is at least eta.
std::vector<std::size_t> active_set(std::span<const double> marginals, double eta);

/// Carries the partial result when the black-box evaluator fails mid-run.
class GTEvaluationError : public std::runtime_error {
 public:
  GTEvaluationError(const std::string& what, GTResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const GTResult& partial() const { return partial_; }

 private:
  GTResult partial_;
};

/// Per-test callback, e.g. for streaming a JSON-lines log.
using TestObserver = std::function<void(const TestRecord&, std::span<const double> marginals)>;

/// Full group-testing phase: variance estimation, then batches of
/// information-maximizing tests until convergence or max_tests.
GTResult run_group_testing(const Evaluator& f, const Point& x_def, const GTConfig& config, Rng& rng,
                           const TestObserver& observer = {});

}  // namespace gtbo
