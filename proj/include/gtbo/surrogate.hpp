#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gtbo/common.hpp"

namespace gtbo::surrogate {

/// Log-normal distribution: log(value) ~ N(mu, sigma^2).
struct LogNormalPrior {
  double mu = 0.0;
  double sigma = 1.0;

  double median() const;
  /// Log density of log(value) (normal in log space, up to a constant).
  double log_density_of_log(double log_value) const;
};

/// Hyperpriors. Lengthscale priors are chosen per dimension by activity;
/// noise and signal priors apply to the standardized targets.
struct GPPriors {
  LogNormalPrior active_lengthscale{0.0, 1.0};
  LogNormalPrior inactive_lengthscale{7.0, 1.0};
  LogNormalPrior noise_variance{-4.0, 1.0};
  LogNormalPrior signal_variance{0.0, 1.0};
};

/// Hyperparameters in standardized target units.
struct GPHyperparameters {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;
  double mean_constant = 0.0;
};

/// Matern-5/2 correlation as a function of the scaled distance r.
double matern52(double r);

class GPFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct PredictionWithGradient {
  double mean = 0.0;
  double variance = 0.0;
  Eigen::VectorXd mean_gradient;
  Eigen::VectorXd variance_gradient;
};

/// Exact GP regression with a Matern-5/2 ARD kernel and a constant mean.
/// Immutable once conditioned; all predictions are in original target units.
class GPModel {
 public:
  /// Conditions on (X, y) with fixed hyperparameters. Targets are standardized
  /// internally. Throws GPFitError if the kernel matrix is not positive
  /// definite at every jitter level.
  static GPModel condition(Eigen::MatrixXd X, const Eigen::VectorXd& y, std::vector<bool> active_mask,
                           GPHyperparameters hyper);

  std::size_t dims() const { return static_cast<std::size_t>(X_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }
  const Eigen::MatrixXd& train_X() const { return X_; }
  const GPHyperparameters& hyperparameters() const { return hyper_; }
  const std::vector<bool>& active_mask() const { return active_mask_; }
  double jitter() const { return jitter_; }

  /// Posterior mean far from the data.
  double prior_mean() const { return y_mean_ + y_scale_ * hyper_.mean_constant; }
  /// Posterior variance far from the data.
  double prior_variance() const { return y_scale_ * y_scale_ * hyper_.signal_variance; }
  double noise_variance() const { return y_scale_ * y_scale_ * hyper_.noise_variance; }

  Prediction predict(std::span<const double> x) const;
  std::vector<Prediction> predict(const Eigen::MatrixXd& Xq) const;
  PredictionWithGradient predict_with_gradient(std::span<const double> x) const;

  /// Log marginal likelihood of the standardized targets.
  double log_marginal_likelihood() const { return log_ml_; }

 private:
  Eigen::VectorXd cross_kernel(std::span<const double> x) const;

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_std_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  std::vector<bool> active_mask_;
  GPHyperparameters hyper_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double log_ml_ = 0.0;
};

struct FitOptions {
  std::size_t restarts = 8;
  std::size_t max_iterations = 200;
  double gradient_tolerance = 1e-4;
  /// Standard deviation of the log-space perturbation of the extra starts.
  double restart_spread = 1.0;
};

/// Log marginal likelihood plus log hyperpriors, and its gradient, at
/// theta = [log lengthscales..., log signal var, log noise var, mean constant]
/// for standardized targets. Exposed for gradient tests.
double log_posterior_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_std,
                               const std::vector<bool>& active_mask, const GPPriors& priors,
                               const Eigen::VectorXd& theta, Eigen::VectorXd* gradient);

/// MAP fit over log-hyperparameters with BFGS from multiple starts: the first
/// at the prior medians (or at `warm_start` if given), the rest perturbed.
GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<bool>& active_mask,
            const GPPriors& priors, Rng& rng, const FitOptions& options = {},
            const std::optional<GPHyperparameters>& warm_start = std::nullopt);

}  // namespace gtbo::surrogate
