#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gtbo/common.hpp"

namespace gtbo::objective {

enum class BaseFunction { Branin2, Levy4, Hartmann6, Griewank8 };

std::string_view name(BaseFunction f);
/// Accepts the canonical names case-insensitively ("levy4", "Branin2", ...).
BaseFunction parse_base_function(std::string_view s);

/// Nominal intrinsic dimensionality (2, 4, 6, 8).
std::size_t nominal_dim(BaseFunction f);
/// Levy and Griewank are defined for any dimensionality; Branin and Hartmann are not.
bool supports_variable_dim(BaseFunction f);

/// Native box of one coordinate of the base function.
struct Interval {
  double lo;
  double hi;

  double to_native(double u) const { return lo + u * (hi - lo); }
  double to_unit(double v) const { return (v - lo) / (hi - lo); }
};

Interval native_interval(BaseFunction f, std::size_t coordinate);

/// Base function evaluated directly in native coordinates.
double evaluate_native(BaseFunction f, std::span<const double> native);

/// Known global minimum value of the base function.
double global_minimum(BaseFunction f, std::size_t dims);

/// A base function embedded in [0,1]^D; all coordinates outside active_indices
/// are inert padding.
struct BenchmarkSpec {
  BaseFunction base = BaseFunction::Branin2;
  std::size_t ambient_dim = 0;
  std::vector<std::size_t> active_indices;
  double noise_std = 0.0;

  std::size_t effective_dim() const { return active_indices.size(); }
  /// Throws ConfigError when the benchmark violates its invariants.
  void validate() const;
  double optimum() const { return global_minimum(base, effective_dim()); }
};

/// Per-benchmark default observation noise.
double default_noise_std(BaseFunction f);

/// Draws the active indices uniformly without replacement. effective_dim of 0
/// selects the nominal dimensionality.
BenchmarkSpec make_spec(BaseFunction base, std::size_t ambient_dim, double noise_std, Rng& rng,
                        std::size_t effective_dim = 0);

double evaluate_true(const BenchmarkSpec& spec, std::span<const double> x);
double evaluate(const BenchmarkSpec& spec, std::span<const double> x, Rng& rng);

enum class DefaultMode { Center, Random };

Point default_point(const BenchmarkSpec& spec, DefaultMode mode, Rng& rng);

/// Griewank's optimum sits at the center of the box, so it uses a random default.
DefaultMode recommended_default_mode(BaseFunction f);

/// Wraps a spec into an Evaluator that owns its noise stream.
Evaluator make_evaluator(const BenchmarkSpec& spec, Rng noise_rng);

}  // namespace gtbo::objective
