#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gtbo/gt_engine.hpp"
#include "gtbo/objective.hpp"
#include "gtbo/optimizer.hpp"

namespace gtbo::cli {

/// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEvaluation = 3;

enum class Method { Gtbo, RandomSearch };

enum class SweepAxis {
  NoiseStd,
  AmbientDim,
  ActiveDim,
  MaxBatch,
  PriorQ,
  MaxAct,
  Particles,
  InactivePriorMu,
};

std::string_view name(Method m);
std::string_view name(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);

struct BenchmarkConfig {
  objective::BaseFunction function = objective::BaseFunction::Branin2;
  std::size_t ambient_dim = 60;
  /// Fixed active indices; drawn per seed when empty.
  std::vector<std::size_t> active_indices;
  /// 0 selects the nominal dimensionality of the function.
  std::size_t effective_dim = 0;
  /// Unset selects the per-function default.
  std::optional<double> noise_std;
  /// Unset selects the recommended mode for the function.
  std::optional<objective::DefaultMode> default_mode;
  /// Fault injection: the evaluator throws after this many calls (0 = never).
  std::size_t fail_after = 0;
};

struct BOConfig {
  /// Total evaluations per seed, group-testing phase included. 0 skips BO.
  std::size_t budget = 300;
  bo::BOOptions options;
};

struct SweepConfig {
  std::optional<SweepAxis> axis;
  std::vector<double> values;
};

struct RunConfig {
  Method method = Method::Gtbo;
  BenchmarkConfig benchmark;
  GTConfig gt;
  BOConfig bo;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "results";
  /// Seeds processed concurrently; 0 selects the hardware concurrency.
  std::size_t jobs = 0;
  SweepConfig sweep;
};

/// Parses a YAML run configuration. Unknown keys and out-of-range values
/// raise ConfigError with the offending key in the message.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Range and consistency checks that do not touch the filesystem.
void validate(const RunConfig& config);

/// output_dir resolved against the GTBO_OUTPUT_ROOT environment variable when
/// that is set and output_dir is relative.
std::filesystem::path resolve_output_dir(const RunConfig& config);

/// Benchmark spec for one seed, with active indices drawn from the seed if
/// the configuration does not fix them.
objective::BenchmarkSpec benchmark_for_seed(const BenchmarkConfig& b, std::uint64_t seed);

/// Per-seed classification metrics against ground truth.
struct Classification {
  /// correct_fraction[t]: share of dimensions correctly classified after test t
  /// (inactive below 0.01, active above 0.9).
  std::vector<double> correct_fraction;
  /// First iteration from which every dimension stays correctly classified.
  std::optional<std::size_t> iterations_to_correct;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

Classification classify(const std::vector<std::vector<double>>& trajectory,
                        const std::vector<std::size_t>& active_set, const std::vector<std::size_t>& truth,
                        std::size_t dims);

struct SeedOutcome {
  std::uint64_t seed = 0;
  int status = kExitOk;
  std::string error;
  std::optional<GTResult> gt;
  std::optional<bo::BOTrace> trace;
  objective::BenchmarkSpec spec;
  std::optional<Classification> classification;
};

/// Runs one seed and writes its artifacts into `dir`.
SeedOutcome run_seed(const RunConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

/// Runs every seed into <output_dir>/seed_<k>. Returns the process exit status.
int run_experiment(const RunConfig& config, std::vector<SeedOutcome>* outcomes = nullptr);

/// Copy of the configuration with one sweep axis set to `value`.
RunConfig with_axis_value(const RunConfig& config, SweepAxis axis, double value);

/// Runs run_experiment per axis value into <output_dir>/<axis>_<value>/ and
/// writes sweep.csv and sweep_iterations.csv into output_dir.
int run_sweep(const RunConfig& config);

enum class PlotKind { Marginals, Regret, Sensitivity, ActiveCount };
PlotKind parse_plot_kind(std::string_view s);

/// Renders SVG files into <results_dir>/plots. Throws ConfigError (before
/// writing anything) when the required inputs are missing.
std::vector<std::filesystem::path> plot(const std::filesystem::path& results_dir, PlotKind kind);

/// Median of a sample; missing values count as larger than any present one.
double median_iterations(std::vector<std::optional<std::size_t>> values);

}  // namespace gtbo::cli
