#include "gtbo/surrogate.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace gtbo::surrogate {

namespace {

const double kSqrt5 = std::sqrt(5.0);
constexpr double kJitterSchedule[] = {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

// Factorizes K + jitter * I with the smallest jitter that yields a positive
// definite matrix. Returns false if every level fails.
bool factorize(Eigen::MatrixXd& K, Eigen::LLT<Eigen::MatrixXd>& chol, double& jitter) {
  double applied = 0.0;
  for (double j : kJitterSchedule) {
    K.diagonal().array() += j - applied;
    applied = j;
    chol.compute(K);
    if (chol.info() == Eigen::Success) {
      const auto d = chol.matrixLLT().diagonal();
      if ((d.array() > 0.0).all() && d.allFinite()) {
        jitter = j;
        return true;
      }
    }
  }
  return false;
}

void standardize(const Eigen::VectorXd& y, double& mean, double& scale) {
  mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  scale = var > 1e-24 ? std::sqrt(var) : 1.0;
}

// Scaled inputs, one column per point.
Eigen::MatrixXd scaled_points(const Eigen::MatrixXd& X, const Eigen::VectorXd& lengthscales) {
  return (X.array().rowwise() / lengthscales.transpose().array()).matrix().transpose();
}

struct FitContext {
  const Eigen::MatrixXd* X;
  const Eigen::VectorXd* y;
  const std::vector<bool>* mask;
  const GPPriors* priors;
};

constexpr double kPenalty = 1e300;

double neg_objective(const gsl_vector* v, void* params, gsl_vector* df) {
  const auto* ctx = static_cast<const FitContext*>(params);
  Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>> theta(v->data, static_cast<Eigen::Index>(v->size),
                                                                    Eigen::InnerStride<>(static_cast<Eigen::Index>(v->stride)));
  Eigen::VectorXd grad;
  const double value =
      log_posterior_objective(*ctx->X, *ctx->y, *ctx->mask, *ctx->priors, theta, df ? &grad : nullptr);
  if (!std::isfinite(value)) {
    if (df) gsl_vector_set_zero(df);
    return kPenalty;
  }
  if (df)
    for (std::size_t i = 0; i < df->size; ++i) gsl_vector_set(df, i, -grad[static_cast<Eigen::Index>(i)]);
  return -value;
}

double gsl_f(const gsl_vector* v, void* params) { return neg_objective(v, params, nullptr); }
void gsl_df(const gsl_vector* v, void* params, gsl_vector* df) { neg_objective(v, params, df); }
void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* df) {
  *f = neg_objective(v, params, df);
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fdfminimizer* m) const { gsl_multimin_fdfminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

// Runs BFGS from theta0; returns the best point visited and its objective.
std::pair<Eigen::VectorXd, double> minimize(FitContext& ctx, const Eigen::VectorXd& theta0,
                                            const FitOptions& options) {
  gsl_set_error_handler_off();
  const auto n = static_cast<std::size_t>(theta0.size());
  gsl_multimin_function_fdf fn{&gsl_f, &gsl_df, &gsl_fdf, n, &ctx};
  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(n));
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x.get(), i, theta0[static_cast<Eigen::Index>(i)]);

  std::unique_ptr<gsl_multimin_fdfminimizer, MinimizerDeleter> m(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n));
  Eigen::VectorXd best = theta0;
  double best_value = gsl_f(x.get(), &ctx);
  if (best_value >= kPenalty) return {best, -std::numeric_limits<double>::infinity()};
  gsl_multimin_fdfminimizer_set(m.get(), &fn, x.get(), 0.1, 0.1);

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const int status = gsl_multimin_fdfminimizer_iterate(m.get());
    const double value = m->f;
    if (std::isfinite(value) && value < best_value) {
      best_value = value;
      for (std::size_t i = 0; i < n; ++i) best[static_cast<Eigen::Index>(i)] = gsl_vector_get(m->x, i);
    }
    if (status != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(m->gradient, options.gradient_tolerance) == GSL_SUCCESS) break;
  }
  return {best, -best_value};
}

Eigen::VectorXd to_theta(const GPHyperparameters& h) {
  const auto d = h.lengthscales.size();
  Eigen::VectorXd theta(d + 3);
  theta.head(d) = h.lengthscales.array().log().matrix();
  theta[d] = std::log(h.signal_variance);
  theta[d + 1] = std::log(h.noise_variance);
  theta[d + 2] = h.mean_constant;
  return theta;
}

GPHyperparameters from_theta(const Eigen::VectorXd& theta) {
  const auto d = theta.size() - 3;
  GPHyperparameters h;
  h.lengthscales = theta.head(d).array().exp().matrix();
  h.signal_variance = std::exp(theta[d]);
  h.noise_variance = std::exp(theta[d + 1]);
  h.mean_constant = theta[d + 2];
  return h;
}

}  // namespace

double LogNormalPrior::median() const { return std::exp(mu); }

double LogNormalPrior::log_density_of_log(double log_value) const {
  const double s = (log_value - mu) / sigma;
  return -0.5 * s * s - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double matern52(double r) {
  const double sr = kSqrt5 * r;
  return (1.0 + sr + sr * sr / 3.0) * std::exp(-sr);
}

double log_posterior_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_std,
                               const std::vector<bool>& active_mask, const GPPriors& priors,
                               const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (theta.size() != d + 3) throw std::invalid_argument("theta has the wrong length");
  if (!theta.allFinite()) return -std::numeric_limits<double>::infinity();

  const Eigen::VectorXd lengthscales = theta.head(d).array().exp().matrix();
  const double sf2 = std::exp(theta[d]);
  const double sn2 = std::exp(theta[d + 1]);
  const double c = theta[d + 2];

  const Eigen::MatrixXd P = scaled_points(X, lengthscales);
  Eigen::MatrixXd K(n, n);
  Eigen::MatrixXd R(n, n);  // scaled distances, lower triangle
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = sf2 + sn2;
    R(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = (P.col(i) - P.col(j)).norm();
      R(i, j) = r;
      K(i, j) = K(j, i) = sf2 * matern52(r);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> chol;
  double jitter = 0.0;
  if (!factorize(K, chol, jitter)) return -std::numeric_limits<double>::infinity();

  const Eigen::VectorXd resid = y_std.array() - c;
  const Eigen::VectorXd alpha = chol.solve(resid);
  const double log_det_half = chol.matrixLLT().diagonal().array().log().sum();
  double value = -0.5 * resid.dot(alpha) - log_det_half -
                 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& prior = active_mask[static_cast<std::size_t>(k)] ? priors.active_lengthscale
                                                                 : priors.inactive_lengthscale;
    value += prior.log_density_of_log(theta[k]);
  }
  value += priors.signal_variance.log_density_of_log(theta[d]);
  value += priors.noise_variance.log_density_of_log(theta[d + 1]);

  if (gradient) {
    Eigen::VectorXd& g = *gradient;
    g.setZero(d + 3);
    const Eigen::MatrixXd Kinv = chol.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;

    double d_sf = 0.0;
    Eigen::ArrayXd d_ell = Eigen::ArrayXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      d_sf += 0.5 * W(i, i) * sf2;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double sr = kSqrt5 * R(i, j);
        const double e = std::exp(-sr);
        d_sf += W(i, j) * sf2 * (1.0 + sr + sr * sr / 3.0) * e;
        // dk/dlog(l_k) = sf2 * 5/3 * (1 + sqrt5 r) e^{-sqrt5 r} * (dx_k / l_k)^2
        const double coef = W(i, j) * sf2 * (5.0 / 3.0) * (1.0 + sr) * e;
        d_ell += coef * (P.col(i) - P.col(j)).array().square();
      }
    }
    g.head(d) = d_ell.matrix();
    g[d] = d_sf;
    g[d + 1] = 0.5 * sn2 * W.trace();
    g[d + 2] = alpha.sum();

    for (Eigen::Index k = 0; k < d; ++k) {
      const auto& prior = active_mask[static_cast<std::size_t>(k)] ? priors.active_lengthscale
                                                                   : priors.inactive_lengthscale;
      g[k] -= (theta[k] - prior.mu) / (prior.sigma * prior.sigma);
    }
    g[d] -= (theta[d] - priors.signal_variance.mu) /
            (priors.signal_variance.sigma * priors.signal_variance.sigma);
    g[d + 1] -= (theta[d + 1] - priors.noise_variance.mu) /
                (priors.noise_variance.sigma * priors.noise_variance.sigma);
  }
  return value;
}

GPModel GPModel::condition(Eigen::MatrixXd X, const Eigen::VectorXd& y, std::vector<bool> active_mask,
                           GPHyperparameters hyper) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y disagree on the number of points");
  if (X.rows() < 1) throw std::invalid_argument("GP needs at least one training point");
  if (static_cast<Eigen::Index>(active_mask.size()) != X.cols() || hyper.lengthscales.size() != X.cols())
    throw std::invalid_argument("dimension mismatch between inputs and hyperparameters");
  if (!(hyper.signal_variance > 0.0 && hyper.noise_variance > 0.0 && (hyper.lengthscales.array() > 0.0).all()))
    throw std::invalid_argument("GP hyperparameters must be strictly positive");

  GPModel m;
  m.X_ = std::move(X);
  m.active_mask_ = std::move(active_mask);
  m.hyper_ = std::move(hyper);
  standardize(y, m.y_mean_, m.y_scale_);
  m.y_std_ = (y.array() - m.y_mean_) / m.y_scale_;

  const Eigen::Index n = m.X_.rows();
  const Eigen::MatrixXd P = scaled_points(m.X_, m.hyper_.lengthscales);
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = m.hyper_.signal_variance + m.hyper_.noise_variance;
    for (Eigen::Index j = 0; j < i; ++j)
      K(i, j) = K(j, i) = m.hyper_.signal_variance * matern52((P.col(i) - P.col(j)).norm());
  }
  if (!factorize(K, m.chol_, m.jitter_)) throw GPFitError("kernel matrix is not positive definite");
  const Eigen::VectorXd resid = m.y_std_.array() - m.hyper_.mean_constant;
  m.alpha_ = m.chol_.solve(resid);
  m.log_ml_ = -0.5 * resid.dot(m.alpha_) - m.chol_.matrixLLT().diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return m;
}

Eigen::VectorXd GPModel::cross_kernel(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != X_.cols()) throw std::invalid_argument("query dimension mismatch");
  const Eigen::Index n = X_.rows();
  Eigen::Map<const Eigen::VectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::ArrayXd inv_l = hyper_.lengthscales.array().inverse();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = ((X_.row(i).transpose() - q).array() * inv_l).matrix().norm();
    k[i] = hyper_.signal_variance * matern52(r);
  }
  return k;
}

Prediction GPModel::predict(std::span<const double> x) const {
  const Eigen::VectorXd k = cross_kernel(x);
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  const double mean = hyper_.mean_constant + k.dot(alpha_);
  const double var = std::max(hyper_.signal_variance - v.squaredNorm(), 0.0);
  return {y_mean_ + y_scale_ * mean, y_scale_ * y_scale_ * var};
}

std::vector<Prediction> GPModel::predict(const Eigen::MatrixXd& Xq) const {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(Xq.rows()));
  Eigen::VectorXd row(Xq.cols());
  for (Eigen::Index i = 0; i < Xq.rows(); ++i) {
    row = Xq.row(i).transpose();
    out.push_back(predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  return out;
}

PredictionWithGradient GPModel::predict_with_gradient(std::span<const double> x) const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index d = X_.cols();
  if (static_cast<Eigen::Index>(x.size()) != d) throw std::invalid_argument("query dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> q(x.data(), d);
  const Eigen::ArrayXd inv_l2 = hyper_.lengthscales.array().square().inverse();

  Eigen::VectorXd k(n);
  Eigen::MatrixXd dk(d, n);  // column i: d k(x, x_i) / dx
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd diff = q.array() - X_.row(i).transpose().array();
    const double r = std::sqrt((diff.square() * inv_l2).sum());
    const double sr = kSqrt5 * r;
    const double e = std::exp(-sr);
    k[i] = hyper_.signal_variance * (1.0 + sr + sr * sr / 3.0) * e;
    dk.col(i) = (-hyper_.signal_variance * (5.0 / 3.0) * (1.0 + sr) * e * diff * inv_l2).matrix();
  }
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  const Eigen::VectorXd kinv_k = chol_.matrixU().solve(v);

  PredictionWithGradient out;
  out.mean = y_mean_ + y_scale_ * (hyper_.mean_constant + k.dot(alpha_));
  const double var = hyper_.signal_variance - v.squaredNorm();
  out.variance = y_scale_ * y_scale_ * std::max(var, 0.0);
  out.mean_gradient = y_scale_ * (dk * alpha_);
  out.variance_gradient = var > 0.0 ? Eigen::VectorXd(-2.0 * y_scale_ * y_scale_ * (dk * kinv_k))
                                    : Eigen::VectorXd::Zero(d);
  return out;
}

GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<bool>& active_mask,
            const GPPriors& priors, Rng& rng, const FitOptions& options,
            const std::optional<GPHyperparameters>& warm_start) {
  if (X.rows() < 2) throw std::invalid_argument("GP fit needs at least two training points");
  if (static_cast<Eigen::Index>(active_mask.size()) != X.cols())
    throw std::invalid_argument("active mask length must equal the input dimension");
  const Eigen::Index d = X.cols();

  double y_mean = 0.0, y_scale = 1.0;
  standardize(y, y_mean, y_scale);
  const Eigen::VectorXd y_std = (y.array() - y_mean) / y_scale;

  GPHyperparameters median;
  median.lengthscales.resize(d);
  for (Eigen::Index k = 0; k < d; ++k)
    median.lengthscales[k] = active_mask[static_cast<std::size_t>(k)] ? priors.active_lengthscale.median()
                                                                      : priors.inactive_lengthscale.median();
  median.signal_variance = priors.signal_variance.median();
  median.noise_variance = priors.noise_variance.median();
  median.mean_constant = 0.0;

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(to_theta(warm_start ? *warm_start : median));
  if (warm_start) starts.push_back(to_theta(median));
  std::normal_distribution<double> jitter(0.0, options.restart_spread);
  const Eigen::VectorXd base = to_theta(median);
  while (starts.size() < std::max<std::size_t>(options.restarts, 1)) {
    Eigen::VectorXd t = base;
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] += jitter(rng);
    starts.push_back(std::move(t));
  }

  FitContext ctx{&X, &y_std, &active_mask, &priors};
  Eigen::VectorXd best_theta;
  double best_value = -std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    auto [theta, value] = minimize(ctx, start, options);
    if (value > best_value) {
      best_value = value;
      best_theta = theta;
    }
  }
  if (!std::isfinite(best_value)) throw GPFitError("no hyperparameter start produced a valid kernel matrix");
  return GPModel::condition(X, y, active_mask, from_theta(best_theta));
}

}  // namespace gtbo::surrogate
