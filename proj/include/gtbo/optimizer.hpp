#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gtbo/common.hpp"
#include "gtbo/gt_engine.hpp"
#include "gtbo/surrogate.hpp"

namespace gtbo::bo {

struct Sample {
  Point x;
  double y = 0.0;
};

/// Collapses points whose active coordinates agree within tol (max-norm) into
/// one row whose target is the mean of the merged observations. Inactive
/// coordinates are ignored; the first point of each cluster is kept.
std::vector<Sample> dedupe(std::span<const Sample> samples, std::span<const std::size_t> active_set,
                           double tol = 1e-6);

/// log(phi(u) + u * Phi(u)), accurate for very negative u.
double log_h(double u);

/// Floor returned when there is no expected improvement.
inline constexpr double kLogEIFloor = -1e10;

/// log expected improvement (minimization) of N(mean, variance) below incumbent.
double log_ei(double mean, double variance, double incumbent);

/// Log expected improvement over the noisy incumbent, the minimum posterior
/// mean over the training inputs.
class LogNoisyEI {
 public:
  explicit LogNoisyEI(const surrogate::GPModel& model);

  double incumbent() const { return incumbent_; }
  double operator()(std::span<const double> x) const;
  /// Value and gradient with respect to x.
  double value_and_gradient(std::span<const double> x, Eigen::VectorXd& gradient) const;

 private:
  const surrogate::GPModel& model_;
  double incumbent_ = 0.0;
};

struct AcquisitionOptions {
  std::size_t raw_candidates = 512;
  std::size_t refine_starts = 10;
  std::size_t refine_iterations = 50;
};

/// Multi-start acquisition maximization over [0,1]^D: scrambled Sobol
/// candidates are scored, the best are refined by projected gradient ascent.
/// Returns the refined candidates ordered from best to worst.
std::vector<Point> propose_candidates(const surrogate::GPModel& model, const AcquisitionOptions& options,
                                      Rng& rng);

Point propose(const surrogate::GPModel& model, const AcquisitionOptions& options, Rng& rng);

struct BOOptions {
  surrogate::GPPriors priors;
  surrogate::FitOptions initial_fit;
  /// Refits after the first reuse the previous hyperparameters as a start.
  surrogate::FitOptions refit{2, 60, 1e-4, 1.0};
  AcquisitionOptions acquisition;
  double dedupe_tol = 1e-6;
};

struct BOTrace {
  std::vector<Point> points;
  std::vector<double> values;
  /// best_so_far[i] = min(values[0..i]).
  std::vector<double> best_so_far;
  std::size_t initial_evaluations = 0;
  std::size_t budget = 0;

  void append(Point x, double y);
  std::size_t incumbent_index(std::size_t upto) const;
};

class BOEvaluationError : public std::runtime_error {
 public:
  BOEvaluationError(const std::string& what, BOTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const BOTrace& partial() const { return partial_; }

 private:
  BOTrace partial_;
};

/// All evaluations made during group testing, in order.
std::vector<Sample> gt_samples(const GTResult& gt);

/// BO phase seeded with the group-testing data: `budget` further evaluations.
/// An empty active set is treated as all dimensions active.
BOTrace run_bo(const Evaluator& f, const GTResult& gt, std::size_t budget, const BOOptions& options,
               Rng& rng);

/// Uniform random search baseline.
BOTrace random_search(const Evaluator& f, std::size_t dims, std::size_t budget, Rng& rng);

}  // namespace gtbo::bo
