#include <fmt/format.h>
#include <fmt/ostream.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "gtbo/cli.hpp"

namespace gtbo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInactiveCorrect = 0.01;
constexpr double kActiveCorrect = 0.9;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

void write_json(const fs::path& p, const json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

// Shortest representation that round-trips.
std::string num(double v) { return fmt::format("{}", v); }

class FailingEvaluator {
 public:
  FailingEvaluator(Evaluator inner, std::size_t fail_after) : inner_(std::move(inner)), fail_after_(fail_after) {}
  double operator()(std::span<const double> x) {
    if (fail_after_ != 0 && calls_ >= fail_after_)
      throw std::runtime_error(fmt::format("evaluator failed after {} evaluations", calls_));
    ++calls_;
    return inner_(x);
  }

 private:
  Evaluator inner_;
  std::size_t fail_after_;
  std::size_t calls_ = 0;
};

json record_json(const TestRecord& r) {
  return json{{"iteration", r.iteration}, {"group", r.group.indices()}, {"y", r.y}, {"z", r.z}, {"point", r.point}};
}

void write_marginals(const fs::path& p, const std::vector<std::vector<double>>& traj, std::size_t dims) {
  auto out = open_out(p);
  out << "iteration";
  for (std::size_t i = 0; i < dims; ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t t = 0; t < traj.size(); ++t) {
    out << t;
    for (double m : traj[t]) out << ',' << num(m);
    out << '\n';
  }
}

void write_noise_model(const fs::path& p, const GTResult& gt) {
  const auto& nm = gt.noise_model;
  std::size_t bins = 0;
  for (const auto& pr : gt.probes) bins += pr.kind == Probe::Kind::Bin;
  write_json(p, json{{"f_def_hat", nm.f_def_hat},
                     {"sigma_n_sq", nm.sigma_n_sq},
                     {"sigma_sq", nm.sigma_sq},
                     {"n_def", nm.n_def},
                     {"max_act", nm.max_act},
                     {"bins", bins},
                     {"x_def", gt.x_def}});
}

std::string phase_of(std::size_t i, const GTResult* gt) {
  if (!gt) return "random";
  const std::size_t defaults = gt->noise_model.n_def;
  if (i < defaults) return "default";
  if (i < gt->probes.size()) return "bin";
  if (i < gt->evaluations()) return "test";
  return "bo";
}

void write_trace(const fs::path& p, const bo::BOTrace& trace, const objective::BenchmarkSpec& spec,
                 const GTResult* gt) {
  auto out = open_out(p);
  out << "evaluation,phase,y,best_y,f_true,regret\n";
  double best_true = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    const double f_true = objective::evaluate_true(spec, trace.points[i]);
    best_true = std::min(best_true, f_true);
    out << i << ',' << phase_of(i, gt) << ',' << num(trace.values[i]) << ',' << num(trace.best_so_far[i]) << ','
        << num(f_true) << ',' << num(best_true - spec.optimum()) << '\n';
  }
}

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const RunConfig& config, const SeedOutcome& o) {
  const auto& spec = o.spec;
  json j;
  j["seed"] = o.seed;
  j["method"] = std::string(name(config.method));
  j["status"] = o.status == kExitOk ? "ok" : "evaluation_error";
  j["error"] = o.error.empty() ? json(nullptr) : json(o.error);
  auto truth = spec.active_indices;
  std::sort(truth.begin(), truth.end());
  j["benchmark"] = {{"function", std::string(objective::name(spec.base))},
                    {"ambient_dim", spec.ambient_dim},
                    {"effective_dim", spec.effective_dim()},
                    {"noise_std", spec.noise_std},
                    {"active_indices", truth},
                    {"optimum", spec.optimum()}};
  if (o.gt) {
    const auto& gt = *o.gt;
    const auto& c = *o.classification;
    j["gt"] = {{"tests", gt.records.size()},
               {"evaluations", gt.evaluations()},
               {"converged", gt.converged},
               {"convergence_iteration", gt.converged ? json(gt.iterations_used) : json(nullptr)},
               {"active_set", gt.active_set},
               {"degenerate", gt.degenerate},
               {"eta", config.gt.eta},
               {"iterations_to_correct", optional_index(c.iterations_to_correct)},
               {"false_positives", c.false_positives},
               {"false_negatives", c.false_negatives}};
  } else {
    j["gt"] = nullptr;
  }
  if (o.trace && !o.trace->values.empty()) {
    const auto& t = *o.trace;
    double best_true = std::numeric_limits<double>::infinity();
    for (const auto& x : t.points) best_true = std::min(best_true, objective::evaluate_true(spec, x));
    j["evaluations"] = t.values.size();
    j["best_observed"] = t.best_so_far.back();
    j["simple_regret"] = best_true - spec.optimum();
  } else {
    j["evaluations"] = o.gt ? o.gt->evaluations() : 0;
    j["best_observed"] = nullptr;
    j["simple_regret"] = nullptr;
  }
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

objective::BenchmarkSpec benchmark_for_seed(const BenchmarkConfig& b, std::uint64_t seed) {
  const double noise = b.noise_std.value_or(objective::default_noise_std(b.function));
  if (!b.active_indices.empty()) {
    objective::BenchmarkSpec spec{b.function, b.ambient_dim, b.active_indices, noise};
    spec.validate();
    return spec;
  }
  Rng rng = make_stream(seed, 1);
  return objective::make_spec(b.function, b.ambient_dim, noise, rng, b.effective_dim);
}

Classification classify(const std::vector<std::vector<double>>& trajectory,
                        const std::vector<std::size_t>& active_set, const std::vector<std::size_t>& truth,
                        std::size_t dims) {
  std::vector<char> is_active(dims, 0);
  for (auto i : truth) is_active[i] = 1;
  Classification c;
  std::optional<std::size_t> last_wrong;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dims; ++i) {
      const double m = trajectory[t][i];
      correct += is_active[i] ? m > kActiveCorrect : m < kInactiveCorrect;
    }
    c.correct_fraction.push_back(static_cast<double>(correct) / static_cast<double>(dims));
    if (correct != dims) last_wrong = t;
  }
  if (!trajectory.empty() && (!last_wrong || *last_wrong + 1 < trajectory.size()))
    c.iterations_to_correct = last_wrong ? *last_wrong + 1 : 0;
  std::set<std::size_t> truth_set(truth.begin(), truth.end());
  std::set<std::size_t> found(active_set.begin(), active_set.end());
  for (auto i : found) c.false_positives += !truth_set.count(i);
  for (auto i : truth_set) c.false_negatives += !found.count(i);
  return c;
}

SeedOutcome run_seed(const RunConfig& config, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  SeedOutcome o;
  o.seed = seed;
  o.spec = benchmark_for_seed(config.benchmark, seed);
  const std::size_t dims = o.spec.ambient_dim;
  auto failing = std::make_shared<FailingEvaluator>(objective::make_evaluator(o.spec, make_stream(seed, 2)),
                                                    config.benchmark.fail_after);
  const Evaluator f = [failing](std::span<const double> x) { return (*failing)(x); };

  if (config.method == Method::RandomSearch) {
    Rng rng = make_stream(seed, 6);
    try {
      o.trace = bo::random_search(f, dims, config.bo.budget, rng);
    } catch (const bo::BOEvaluationError& e) {
      o.trace = e.partial();
      o.status = kExitEvaluation;
      o.error = e.what();
    }
    write_trace(dir / "trace.csv", *o.trace, o.spec, nullptr);
    return o;
  }

  Rng drng = make_stream(seed, 3);
  const auto mode = config.benchmark.default_mode.value_or(objective::recommended_default_mode(o.spec.base));
  const Point x_def = objective::default_point(o.spec, mode, drng);

  auto tests_log = open_out(dir / "tests.jsonl");
  std::size_t logged = 0;
  const TestObserver observer = [&](const TestRecord& r, std::span<const double>) {
    tests_log << record_json(r).dump() << '\n';
    ++logged;
  };

  const auto t0 = std::chrono::steady_clock::now();
  Rng gt_rng = make_stream(seed, 4);
  try {
    o.gt = run_group_testing(f, x_def, config.gt, gt_rng, observer);
  } catch (const GTEvaluationError& e) {
    o.gt = e.partial();
    o.status = kExitEvaluation;
    o.error = e.what();
    // Tests of the interrupted batch are not reported by the engine.
    for (std::size_t j = logged; j < o.gt->records.size(); ++j) observer(o.gt->records[j], {});
  }
  tests_log.close();
  const double gt_seconds = seconds_since(t0);

  auto& gt = *o.gt;
  auto truth = o.spec.active_indices;
  std::sort(truth.begin(), truth.end());
  if (gt.marginal_trajectory.empty()) gt.marginal_trajectory.push_back(std::vector<double>(dims, config.gt.prior_q));
  o.classification = classify(gt.marginal_trajectory, gt.active_set, truth, dims);
  write_marginals(dir / "marginals.csv", gt.marginal_trajectory, dims);
  write_noise_model(dir / "noise_model.json", gt);

  const auto t1 = std::chrono::steady_clock::now();
  bo::BOTrace trace;
  for (const auto& s : bo::gt_samples(gt)) trace.append(s.x, s.y);
  trace.initial_evaluations = trace.values.size();
  if (o.status == kExitOk && config.bo.budget > gt.evaluations()) {
    Rng bo_rng = make_stream(seed, 5);
    try {
      trace = bo::run_bo(f, gt, config.bo.budget - gt.evaluations(), config.bo.options, bo_rng);
    } catch (const bo::BOEvaluationError& e) {
      trace = e.partial();
      o.status = kExitEvaluation;
      o.error = e.what();
    }
  }
  o.trace = std::move(trace);
  write_trace(dir / "trace.csv", *o.trace, o.spec, &gt);
  write_json(dir / "summary.json", summary_json(config, o));

  fmt::print(stderr, "seed {}: {} tests, {} evaluations, gt {:.1f}s, bo {:.1f}s\n", seed, gt.records.size(),
             o.trace->values.size(), gt_seconds, seconds_since(t1));
  return o;
}

int run_experiment(const RunConfig& config, std::vector<SeedOutcome>* outcomes) {
  validate(config);
  const fs::path root = resolve_output_dir(config);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw ConfigError("output_dir '" + root.string() + "' is not writable");
  {
    const fs::path probe = root / ".write_test";
    std::ofstream test(probe);
    if (!test) throw ConfigError("output_dir '" + root.string() + "' is not writable");
    test.close();
    fs::remove(probe, ec);
  }

  const std::size_t n = config.seeds.size();
  std::vector<SeedOutcome> results(n);
  std::vector<std::string> failures(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) {
      const auto seed = config.seeds[k];
      try {
        results[k] = run_seed(config, seed, root / fmt::format("seed_{}", seed));
      } catch (const std::exception& e) {
        results[k].seed = seed;
        results[k].status = kExitEvaluation;
        results[k].error = e.what();
      }
    }
  };
  std::size_t jobs = config.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.jobs;
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  int status = kExitOk;
  for (const auto& r : results) {
    if (r.status != kExitOk) {
      fmt::print(stderr, "seed {}: {}\n", r.seed, r.error);
      status = std::max(status, r.status);
    }
  }
  if (outcomes) *outcomes = std::move(results);
  return status;
}

RunConfig with_axis_value(const RunConfig& config, SweepAxis axis, double value) {
  RunConfig c = config;
  auto as_count = [&](const char* what) {
    if (!(value >= 0.0 && std::floor(value) == value))
      throw ConfigError(fmt::format("sweep value {} for {} must be a non-negative integer", value, what));
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::NoiseStd: c.benchmark.noise_std = value; break;
    case SweepAxis::AmbientDim: c.benchmark.ambient_dim = as_count("ambient_dim"); break;
    case SweepAxis::ActiveDim:
      if (!c.benchmark.active_indices.empty())
        throw ConfigError("sweeping active_dim requires benchmark.active_indices to be unset");
      c.benchmark.effective_dim = as_count("active_dim");
      break;
    case SweepAxis::MaxBatch: c.gt.max_batch = as_count("max_batch"); break;
    case SweepAxis::PriorQ: c.gt.prior_q = value; break;
    case SweepAxis::MaxAct: c.gt.max_act = as_count("max_act"); break;
    case SweepAxis::Particles: c.gt.particles = as_count("particles"); break;
    case SweepAxis::InactivePriorMu: c.bo.options.priors.inactive_lengthscale.mu = value; break;
  }
  c.sweep = {};
  validate(c);
  return c;
}

double median_iterations(std::vector<std::optional<std::size_t>> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  auto as_double = [](const std::optional<std::size_t>& v) {
    return v ? static_cast<double>(*v) : std::numeric_limits<double>::infinity();
  };
  std::vector<double> v;
  for (const auto& x : values) v.push_back(as_double(x));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int run_sweep(const RunConfig& config) {
  validate(config);
  if (!config.sweep.axis) throw ConfigError("sweep.axis is required for a sweep");
  const auto axis = *config.sweep.axis;
  // Validate every value before running anything.
  std::vector<RunConfig> configs;
  for (double v : config.sweep.values) configs.push_back(with_axis_value(config, axis, v));

  const fs::path root = resolve_output_dir(config);
  int status = kExitOk;
  struct Row {
    double value;
    std::vector<SeedOutcome> outcomes;
  };
  std::vector<Row> rows;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    auto c = configs[k];
    c.output_dir = root / fmt::format("{}_{}", name(axis), config.sweep.values[k]);
    Row row{config.sweep.values[k], {}};
    status = std::max(status, run_experiment(c, &row.outcomes));
    rows.push_back(std::move(row));
  }

  auto curve = open_out(root / "sweep.csv");
  curve << "axis,value,iteration,correct_pct_mean,correct_pct_min,seeds\n";
  auto per_seed = open_out(root / "sweep_iterations.csv");
  per_seed << "axis,value,seed,iterations_to_correct,false_positives,false_negatives\n";
  for (const auto& row : rows) {
    std::vector<const Classification*> cls;
    for (const auto& o : row.outcomes) {
      if (!o.classification) continue;
      cls.push_back(&*o.classification);
      per_seed << name(axis) << ',' << num(row.value) << ',' << o.seed << ','
               << (o.classification->iterations_to_correct ? std::to_string(*o.classification->iterations_to_correct)
                                                           : std::string())
               << ',' << o.classification->false_positives << ',' << o.classification->false_negatives << '\n';
    }
    std::size_t horizon = 0;
    for (const auto* c : cls) horizon = std::max(horizon, c->correct_fraction.size());
    for (std::size_t t = 0; t < horizon; ++t) {
      double sum = 0.0, mn = 1.0;
      for (const auto* c : cls) {
        // Runs that stopped early keep their final classification.
        const double v = c->correct_fraction[std::min(t, c->correct_fraction.size() - 1)];
        sum += v;
        mn = std::min(mn, v);
      }
      curve << name(axis) << ',' << num(row.value) << ',' << t << ',' << num(100.0 * sum / cls.size()) << ','
            << num(100.0 * mn) << ',' << cls.size() << '\n';
    }
    std::vector<std::optional<std::size_t>> its;
    for (const auto* c : cls) its.push_back(c->iterations_to_correct);
    fmt::print(stderr, "{} = {}: median iterations to 100% correct {}\n", name(axis), row.value,
               median_iterations(its));
  }
  return status;
}

}  // namespace gtbo::cli
