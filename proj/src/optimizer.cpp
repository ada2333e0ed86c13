#include "gtbo/optimizer.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

namespace gtbo::bo {

namespace {

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_phi(double u) { return -0.5 * u * u - kLogSqrt2Pi; }

// 1 - x R(x) for the Mills ratio R(x) = Phi(-x) / phi(x), x >= 1.
double one_minus_x_mills(double x) {
  if (x < 20.0) {
    const double mills = 0.5 * std::erfc(x / std::numbers::sqrt2) * std::exp(0.5 * x * x + kLogSqrt2Pi);
    return 1.0 - x * mills;
  }
  // Asymptotic series; terms shrink by (2k+1)/x^2 <= 0.05 here.
  const double inv2 = 1.0 / (x * x);
  double term = inv2;
  double sum = 0.0;
  for (int k = 1; k <= 10; ++k) {
    sum += term;
    term *= -static_cast<double>(2 * k + 1) * inv2;
  }
  return sum;
}

double log_Phi(double u) {
  if (u > -20.0) return std::log(0.5 * std::erfc(-u / std::numbers::sqrt2));
  const double x = -u;
  const double inv2 = 1.0 / (x * x);
  // Phi(-x) = phi(x) R(x), R(x) ~ (1/x)(1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
  const double series = 1.0 - inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2 +
                        105.0 * inv2 * inv2 * inv2 * inv2;
  return log_phi(x) - std::log(x) + std::log(series);
}

bool duplicates_existing(std::span<const double> x, std::span<const Sample> samples,
                         std::span<const std::size_t> active, double tol) {
  for (const auto& s : samples) {
    bool same = true;
    for (auto i : active) {
      if (std::abs(s.x[i] - x[i]) >= tol) {
        same = false;
        break;
      }
    }
    if (same) return true;
  }
  return false;
}

Point uniform_point(std::size_t dims, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point x(dims);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

std::vector<Sample> dedupe(std::span<const Sample> samples, std::span<const std::size_t> active_set,
                           double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("dedupe tolerance must be positive");
  std::vector<Sample> out;
  std::vector<std::size_t> counts;
  for (const auto& s : samples) {
    bool merged = false;
    for (std::size_t c = 0; c < out.size(); ++c) {
      bool same = true;
      for (auto i : active_set) {
        if (std::abs(out[c].x[i] - s.x[i]) >= tol) {
          same = false;
          break;
        }
      }
      if (same) {
        // Running mean of the merged observations.
        ++counts[c];
        out[c].y += (s.y - out[c].y) / static_cast<double>(counts[c]);
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.push_back(s);
      counts.push_back(1);
    }
  }
  return out;
}

double log_h(double u) {
  if (u > -1.0) {
    const double Phi = 0.5 * std::erfc(-u / std::numbers::sqrt2);
    return std::log(std::exp(log_phi(u)) + u * Phi);
  }
  return log_phi(u) + std::log(one_minus_x_mills(-u));
}

double log_ei(double mean, double variance, double incumbent) {
  const double sigma = std::sqrt(std::max(variance, 0.0));
  if (sigma < 1e-12) {
    const double improvement = incumbent - mean;
    return improvement > 0.0 ? std::max(std::log(improvement), kLogEIFloor) : kLogEIFloor;
  }
  const double u = (incumbent - mean) / sigma;
  const double v = std::log(sigma) + log_h(u);
  return std::isfinite(v) ? std::max(v, kLogEIFloor) : kLogEIFloor;
}

LogNoisyEI::LogNoisyEI(const surrogate::GPModel& model) : model_(model) {
  const auto& X = model.train_X();
  incumbent_ = std::numeric_limits<double>::infinity();
  Eigen::VectorXd row(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    row = X.row(i).transpose();
    incumbent_ = std::min(
        incumbent_, model.predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).mean);
  }
}

double LogNoisyEI::operator()(std::span<const double> x) const {
  const auto p = model_.predict(x);
  return log_ei(p.mean, p.variance, incumbent_);
}

double LogNoisyEI::value_and_gradient(std::span<const double> x, Eigen::VectorXd& gradient) const {
  const auto p = model_.predict_with_gradient(x);
  const double value = log_ei(p.mean, p.variance, incumbent_);
  const double sigma = std::sqrt(p.variance);
  if (value <= kLogEIFloor || sigma < 1e-12) {
    gradient = sigma < 1e-12 && value > kLogEIFloor
                   ? Eigen::VectorXd(-p.mean_gradient / (incumbent_ - p.mean))
                   : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
    return value;
  }
  const double u = (incumbent_ - p.mean) / sigma;
  const Eigen::VectorXd dsigma = p.variance_gradient / (2.0 * sigma);
  const Eigen::VectorXd du = (-p.mean_gradient - u * dsigma) / sigma;
  const double ratio = std::exp(log_Phi(u) - log_h(u));  // h'(u) / h(u)
  gradient = dsigma / sigma + ratio * du;
  return value;
}

std::vector<Point> propose_candidates(const surrogate::GPModel& model, const AcquisitionOptions& options,
                                      Rng& rng) {
  const std::size_t dims = model.dims();
  const LogNoisyEI acq(model);

  // Sobol points with a random shift modulo 1.
  boost::random::sobol qrng(dims);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> shift(dims);
  for (auto& s : shift) s = u01(rng);
  const double scale = 1.0 / (static_cast<double>((boost::random::sobol::max)()) + 1.0);

  struct Scored {
    Point x;
    double value;
  };
  std::vector<Scored> raw;
  raw.reserve(options.raw_candidates);
  for (std::size_t j = 0; j < options.raw_candidates; ++j) {
    Point x(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      const double v = static_cast<double>(qrng()) * scale + shift[d];
      x[d] = v - std::floor(v);
    }
    const double value = acq(x);
    raw.push_back({std::move(x), value});
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Scored& a, const Scored& b) { return a.value > b.value; });
  raw.resize(std::min(raw.size(), std::max<std::size_t>(options.refine_starts, 1)));

  // Projected gradient ascent along the normalized gradient with an adaptive step.
  for (auto& cand : raw) {
    Eigen::VectorXd grad;
    double value = acq.value_and_gradient(cand.x, grad);
    double step = 0.05;
    for (std::size_t it = 0; it < options.refine_iterations && step > 1e-7; ++it) {
      const double norm = grad.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) break;
      Point next(dims);
      for (std::size_t d = 0; d < dims; ++d)
        next[d] = std::clamp(cand.x[d] + step * grad[static_cast<Eigen::Index>(d)] / norm, 0.0, 1.0);
      Eigen::VectorXd next_grad;
      const double next_value = acq.value_and_gradient(next, next_grad);
      if (next_value > value) {
        cand.x = std::move(next);
        value = next_value;
        grad = std::move(next_grad);
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    cand.value = value;
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Scored& a, const Scored& b) { return a.value > b.value; });

  std::vector<Point> out;
  out.reserve(raw.size());
  for (auto& c : raw) out.push_back(std::move(c.x));
  return out;
}

Point propose(const surrogate::GPModel& model, const AcquisitionOptions& options, Rng& rng) {
  return propose_candidates(model, options, rng).front();
}

void BOTrace::append(Point x, double y) {
  best_so_far.push_back(best_so_far.empty() ? y : std::min(best_so_far.back(), y));
  points.push_back(std::move(x));
  values.push_back(y);
}

std::size_t BOTrace::incumbent_index(std::size_t upto) const {
  const auto end = values.begin() + static_cast<std::ptrdiff_t>(std::min(upto + 1, values.size()));
  return static_cast<std::size_t>(std::min_element(values.begin(), end) - values.begin());
}

std::vector<Sample> gt_samples(const GTResult& gt) {
  std::vector<Sample> out;
  out.reserve(gt.evaluations());
  for (const auto& p : gt.probes) out.push_back({p.point, p.y});
  for (const auto& r : gt.records) out.push_back({r.point, r.y});
  return out;
}

BOTrace run_bo(const Evaluator& f, const GTResult& gt, std::size_t budget, const BOOptions& options,
               Rng& rng) {
  std::vector<Sample> samples = gt_samples(gt);
  BOTrace trace;
  for (const auto& s : samples) trace.append(s.x, s.y);
  trace.initial_evaluations = samples.size();
  trace.budget = budget;
  if (budget == 0) return trace;

  const std::size_t dims = gt.x_def.size();
  std::vector<std::size_t> active = gt.active_set;
  if (active.empty()) {
    std::cerr << "warning: group testing found no active dimension; treating all dimensions as active\n";
    active.resize(dims);
    std::iota(active.begin(), active.end(), std::size_t{0});
  }
  std::vector<bool> mask(dims, false);
  for (auto i : active) mask[i] = true;

  std::optional<surrogate::GPHyperparameters> warm;
  for (std::size_t it = 0; it < budget; ++it) {
    const auto data = dedupe(samples, active, options.dedupe_tol);
    Point x;
    if (data.size() < 2) {
      x = uniform_point(dims, rng);
    } else {
      Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(dims));
      Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
      for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t d = 0; d < dims; ++d)
          X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = data[i].x[d];
        y[static_cast<Eigen::Index>(i)] = data[i].y;
      }
      const auto model =
          surrogate::fit(X, y, mask, options.priors, rng, warm ? options.refit : options.initial_fit, warm);
      warm = model.hyperparameters();
      for (auto& c : propose_candidates(model, options.acquisition, rng)) {
        if (!duplicates_existing(c, samples, active, options.dedupe_tol)) {
          x = std::move(c);
          break;
        }
      }
      if (x.empty()) x = uniform_point(dims, rng);
    }
    double y;
    try {
      y = f(x);
    } catch (const std::exception& e) {
      throw BOEvaluationError(e.what(), trace);
    }
    samples.push_back({x, y});
    trace.append(std::move(x), y);
  }
  return trace;
}

BOTrace random_search(const Evaluator& f, std::size_t dims, std::size_t budget, Rng& rng) {
  BOTrace trace;
  trace.budget = budget;
  for (std::size_t i = 0; i < budget; ++i) {
    Point x = uniform_point(dims, rng);
    double y;
    try {
      y = f(x);
    } catch (const std::exception& e) {
      throw BOEvaluationError(e.what(), trace);
    }
    trace.append(std::move(x), y);
  }
  return trace;
}

}  // namespace gtbo::bo
