#include "gtbo/objective.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gtbo::objective {

namespace {

using std::numbers::pi;

double branin(std::span<const double> x) {
  constexpr double a = 1.0;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  constexpr double r = 6.0;
  constexpr double s = 10.0;
  const double t = 1.0 / (8.0 * pi);
  const double q = x[1] - b * x[0] * x[0] + c * x[0] - r;
  return a * q * q + s * (1.0 - t) * std::cos(x[0]) + s;
}

double levy(std::span<const double> x) {
  const std::size_t d = x.size();
  auto w = [&](std::size_t i) { return 1.0 + (x[i] - 1.0) / 4.0; };
  const double s0 = std::sin(pi * w(0));
  double total = s0 * s0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    const double wi = w(i);
    const double si = std::sin(pi * wi + 1.0);
    total += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * si * si);
  }
  const double wd = w(d - 1);
  const double sd = std::sin(2.0 * pi * wd);
  total += (wd - 1.0) * (wd - 1.0) * (1.0 + sd * sd);
  return total;
}

double hartmann6(std::span<const double> x) {
  static constexpr std::array<double, 4> alpha{1.0, 1.2, 3.0, 3.2};
  static constexpr std::array<std::array<double, 6>, 4> A{{{10, 3, 17, 3.5, 1.7, 8},
                                                           {0.05, 10, 17, 0.1, 8, 14},
                                                           {3, 3.5, 1.7, 10, 17, 8},
                                                           {17, 8, 0.05, 10, 0.1, 14}}};
  static constexpr std::array<std::array<double, 6>, 4> P{
      {{1312e-4, 1696e-4, 5569e-4, 124e-4, 8283e-4, 5886e-4},
       {2329e-4, 4135e-4, 8307e-4, 3736e-4, 1004e-4, 9991e-4},
       {2348e-4, 1451e-4, 3522e-4, 2883e-4, 3047e-4, 6650e-4},
       {4047e-4, 8828e-4, 8732e-4, 5743e-4, 1091e-4, 381e-4}}};
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < 6; ++j) inner += A[i][j] * (x[j] - P[i][j]) * (x[j] - P[i][j]);
    total -= alpha[i] * std::exp(-inner);
  }
  return total;
}

double griewank(std::span<const double> x) {
  double sum = 0.0;
  double prod = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i] * x[i] / 4000.0;
    prod *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
  }
  return sum - prod + 1.0;
}

}  // namespace

std::string_view name(BaseFunction f) {
  switch (f) {
    case BaseFunction::Branin2: return "branin2";
    case BaseFunction::Levy4: return "levy4";
    case BaseFunction::Hartmann6: return "hartmann6";
    case BaseFunction::Griewank8: return "griewank8";
  }
  return "unknown";
}

BaseFunction parse_base_function(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto f : {BaseFunction::Branin2, BaseFunction::Levy4, BaseFunction::Hartmann6,
                 BaseFunction::Griewank8}) {
    if (lower == name(f)) return f;
  }
  throw ConfigError("unknown benchmark function '" + std::string(s) + "'");
}

std::size_t nominal_dim(BaseFunction f) {
  switch (f) {
    case BaseFunction::Branin2: return 2;
    case BaseFunction::Levy4: return 4;
    case BaseFunction::Hartmann6: return 6;
    case BaseFunction::Griewank8: return 8;
  }
  return 0;
}

bool supports_variable_dim(BaseFunction f) {
  return f == BaseFunction::Levy4 || f == BaseFunction::Griewank8;
}

Interval native_interval(BaseFunction f, std::size_t coordinate) {
  switch (f) {
    case BaseFunction::Branin2: return coordinate == 0 ? Interval{-5.0, 10.0} : Interval{0.0, 15.0};
    case BaseFunction::Levy4: return {-10.0, 10.0};
    case BaseFunction::Hartmann6: return {0.0, 1.0};
    case BaseFunction::Griewank8: return {-600.0, 600.0};
  }
  return {0.0, 1.0};
}

double evaluate_native(BaseFunction f, std::span<const double> native) {
  switch (f) {
    case BaseFunction::Branin2: return branin(native);
    case BaseFunction::Levy4: return levy(native);
    case BaseFunction::Hartmann6: return hartmann6(native);
    case BaseFunction::Griewank8: return griewank(native);
  }
  return 0.0;
}

double global_minimum(BaseFunction f, std::size_t /*dims*/) {
  switch (f) {
    case BaseFunction::Branin2: return 0.397887357729738;
    case BaseFunction::Levy4: return 0.0;
    case BaseFunction::Hartmann6: return -3.32236801141551;
    case BaseFunction::Griewank8: return 0.0;
  }
  return 0.0;
}

double default_noise_std(BaseFunction f) {
  switch (f) {
    case BaseFunction::Branin2: return 0.5;
    case BaseFunction::Levy4: return 0.1;
    case BaseFunction::Hartmann6: return 0.01;
    case BaseFunction::Griewank8: return 0.5;
  }
  return 0.0;
}

void BenchmarkSpec::validate() const {
  const std::size_t d = active_indices.size();
  if (supports_variable_dim(base)) {
    if (d == 0) throw ConfigError("benchmark needs at least one active dimension");
  } else if (d != nominal_dim(base)) {
    throw ConfigError(std::string(name(base)) + " requires exactly " +
                      std::to_string(nominal_dim(base)) + " active indices");
  }
  if (ambient_dim < d) throw ConfigError("ambient_dim is smaller than the number of active indices");
  std::vector<std::size_t> sorted = active_indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("active_indices must be distinct");
  if (!sorted.empty() && sorted.back() >= ambient_dim)
    throw ConfigError("active index out of range");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
}

BenchmarkSpec make_spec(BaseFunction base, std::size_t ambient_dim, double noise_std, Rng& rng,
                        std::size_t effective_dim) {
  const std::size_t d = effective_dim == 0 ? nominal_dim(base) : effective_dim;
  if (d > ambient_dim) throw ConfigError("effective dimensionality exceeds ambient_dim");
  std::vector<std::size_t> all(ambient_dim);
  std::iota(all.begin(), all.end(), std::size_t{0});
  // Partial Fisher-Yates keeps the draw independent of the stdlib's shuffle.
  for (std::size_t i = 0; i < d; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ambient_dim - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  BenchmarkSpec spec{base, ambient_dim, {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(d)},
                     noise_std};
  spec.validate();
  return spec;
}

double evaluate_true(const BenchmarkSpec& spec, std::span<const double> x) {
  if (x.size() != spec.ambient_dim)
    throw std::invalid_argument("point has " + std::to_string(x.size()) + " coordinates, expected " +
                                std::to_string(spec.ambient_dim));
  for (double u : x)
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("point outside the unit hypercube");
  std::vector<double> native(spec.active_indices.size());
  for (std::size_t j = 0; j < native.size(); ++j)
    native[j] = native_interval(spec.base, j).to_native(x[spec.active_indices[j]]);
  return evaluate_native(spec.base, native);
}

double evaluate(const BenchmarkSpec& spec, std::span<const double> x, Rng& rng) {
  const double f = evaluate_true(spec, x);
  if (spec.noise_std == 0.0) return f;
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  return f + noise(rng);
}

Point default_point(const BenchmarkSpec& spec, DefaultMode mode, Rng& rng) {
  Point x(spec.ambient_dim, 0.5);
  if (mode == DefaultMode::Random) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : x) v = u(rng);
  }
  return x;
}

DefaultMode recommended_default_mode(BaseFunction f) {
  return f == BaseFunction::Griewank8 ? DefaultMode::Random : DefaultMode::Center;
}

Evaluator make_evaluator(const BenchmarkSpec& spec, Rng noise_rng) {
  return [spec, rng = std::move(noise_rng)](std::span<const double> x) mutable {
    return evaluate(spec, x, rng);
  };
}

}  // namespace gtbo::objective
