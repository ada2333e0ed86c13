// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails. Criterion numbers given on the
// command line restrict the run to those criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "gtbo/cli.hpp"
#include "gtbo/information.hpp"
#include "gtbo/particles.hpp"
#include "gtbo/surrogate.hpp"
#include "gtbo/variance_estimation.hpp"
#include "oracles.hpp"

using namespace gtbo;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

fs::path work_root() {
  const auto p = fs::temp_directory_path() / "gtbo_acceptance";
  fs::create_directories(p);
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_iters(double v) { return std::isinf(v) ? "inf" : fmt::format("{}", v); }

cli::RunConfig levy_config(const std::string& name) {
  auto c = cli::parse_config(R"(
seeds: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
benchmark: {function: levy4, ambient_dim: 100, noise_std: 0.1}
bo: {budget: 0}
)");
  c.output_dir = work_root() / name;
  c.jobs = 1;
  return c;
}

// Group-testing outcomes of the recovery run, shared with the GP criterion.
std::vector<cli::SeedOutcome>& recovery_outcomes() {
  static std::vector<cli::SeedOutcome> outcomes;
  if (outcomes.empty()) {
    const auto c = levy_config("recovery");
    fs::remove_all(c.output_dir);
    if (cli::run_experiment(c, &outcomes) != cli::kExitOk) throw std::runtime_error("recovery run failed");
  }
  return outcomes;
}

Verdict criterion_1() {
  const auto& outcomes = recovery_outcomes();
  bool ok = true;
  std::size_t fp = 0;
  std::size_t max_tests = 0;
  double min_active = 1.0;
  for (const auto& o : outcomes) {
    const auto& gt = *o.gt;
    const auto& last = gt.marginal_trajectory.back();
    for (auto i : o.spec.active_indices) min_active = std::min(min_active, last[i]);
    const std::set<std::size_t> truth(o.spec.active_indices.begin(), o.spec.active_indices.end());
    for (auto i : gt.active_set) fp += !truth.count(i);
    max_tests = std::max(max_tests, gt.records.size());
    ok = ok && gt.converged && gt.records.size() <= 150;
  }
  ok = ok && min_active >= 0.9 && fp <= 1;
  return {ok, fmt::format("min active marginal {:.4f}, false positives {}, max tests per seed {}", min_active, fp,
                          max_tests)};
}

Verdict criterion_2() {
  const std::size_t D = 10;
  const double q = 0.05;
  const double sn2 = 0.01, s2 = 1.0;
  const std::vector<oracle::ScriptedTest> tests{
      {{0, 1, 2, 3, 4}, 0.9}, {{5, 6, 7, 8, 9}, -1.1}, {{0, 1}, 0.05},  {{2, 3}, 1.4}, {{5, 6}, -0.12},
      {{7, 8}, 0.7},          {{4, 9}, 0.08},          {{2}, -0.6},     {{3, 8}, 0.15}, {{0, 5, 9}, -0.02},
  };
  NoiseModel nm;
  nm.sigma_n_sq = sn2;
  nm.sigma_sq = s2;
  const auto exact = oracle::exact_marginals(D, q, tests, sn2, s2);
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    auto ps = ParticlePosterior::sample_prior(50000, std::vector<double>(D, q), rng);
    for (const auto& t : tests) {
      ps.update(DimMask::from_indices(D, t.group), t.z, nm);
      ps.maybe_rejuvenate(nm, rng);
    }
    const auto got = ps.marginals();
    for (std::size_t i = 0; i < D; ++i) worst = std::max(worst, std::abs(got[i] - exact[i]));
  }
  return {worst <= 0.03, fmt::format("max abs error {:.4f} over 3 particle seeds", worst)};
}

Verdict criterion_3() {
  Rng rng(7);
  const double sn2 = 0.04, s2 = 2.5;
  const double e0 = std::abs(gmm_entropy_mc(0.0, sn2, s2, 100000, rng) - oracle::gaussian_entropy(sn2));
  const double e1 = std::abs(gmm_entropy_mc(1.0, sn2, s2, 100000, rng) - oracle::gaussian_entropy(s2));

  NoiseModel nm;
  nm.sigma_n_sq = 1e-4;
  nm.sigma_sq = 1.0;
  const double mi = mutual_information(0.5, nm, 100000, rng).value;
  const double quad = oracle::mutual_information_quadrature(0.5, 1e-4, 1.0);

  double excess = -1e9;
  for (double p : {0.05, 0.25, 0.5, 0.75, 0.95})
    for (double ratio : {1.5, 3.0, 10.0, 30.0, 100.0}) {
      NoiseModel g;
      g.sigma_n_sq = 0.01;
      g.sigma_sq = 0.01 * ratio * ratio;
      excess = std::max(excess, mutual_information(p, g, 10000, rng).value - binary_entropy(p));
    }
  const bool ok = e0 <= 0.01 && e1 <= 0.01 && std::abs(mi - quad) <= 0.02 && excess <= 0.02;
  return {ok, fmt::format("entropy errors {:.4f}/{:.4f}, MI {:.4f} vs quadrature {:.4f}, max excess over H_b {:.4f}",
                          e0, e1, mi, quad, excess)};
}

Verdict criterion_4() {
  const std::size_t D = 100;
  const double noise = 0.1;
  const double c = 10.0;
  // The signal bin's offset is c |u - 0.5| with |u - 0.5| in [0.4, 0.5].
  const double oracle_value = oracle::simulated_noise_variance(30, 10, 10, noise, 1, 0.45 * c, true, 4001, 11);
  std::size_t good = 0;
  double lo = 1e300, hi = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto noise_rng = std::make_shared<Rng>(make_stream(s, 2));
    const Evaluator f = [=](std::span<const double> x) {
      std::normal_distribution<double> eps(0.0, noise);
      return c * (x[42] - 0.5) + eps(*noise_rng);
    };
    Rng rng = make_stream(s, 4);
    const auto m = estimate_noise_model(f, Point(D, 0.5), {}, rng).model;
    const double ratio = m.sigma_n_sq / oracle_value;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    good += ratio >= 1.0 / 3.0 && ratio <= 3.0 && m.sigma_sq >= 100.0 * m.sigma_n_sq;
  }
  return {good >= 18, fmt::format("{}/20 seeds within factor 3 of oracle {:.3g} with signal >= 100x noise "
                                  "(ratio range {:.2f}..{:.2f})",
                                  good, oracle_value, lo, hi)};
}

// Median iterations to full correct classification per axis value.
std::vector<double> sweep_medians(cli::SweepAxis axis, const std::vector<double>& values, const std::string& name) {
  const auto base = levy_config(name);
  std::vector<double> out;
  for (double v : values) {
    auto c = cli::with_axis_value(base, axis, v);
    c.output_dir = base.output_dir / fmt::format("{}_{}", cli::name(axis), v);
    fs::remove_all(c.output_dir);
    std::vector<cli::SeedOutcome> outcomes;
    if (cli::run_experiment(c, &outcomes) != cli::kExitOk) throw std::runtime_error("sweep run failed");
    std::vector<std::optional<std::size_t>> iters;
    for (const auto& o : outcomes) iters.push_back(o.classification->iterations_to_correct);
    out.push_back(cli::median_iterations(iters));
  }
  return out;
}

Verdict criterion_5() {
  const auto noise = sweep_medians(cli::SweepAxis::NoiseStd, {0.01, 0.1, 1.0}, "sens_noise");
  const auto active = sweep_medians(cli::SweepAxis::ActiveDim, {4, 8, 16}, "sens_active");
  const auto nondecreasing = [](const std::vector<double>& v) { return std::is_sorted(v.begin(), v.end()); };
  return {nondecreasing(noise) && nondecreasing(active),
          fmt::format("noise 0.01/0.1/1.0 -> {}/{}/{}; active 4/8/16 -> {}/{}/{}", fmt_iters(noise[0]),
                      fmt_iters(noise[1]), fmt_iters(noise[2]), fmt_iters(active[0]), fmt_iters(active[1]),
                      fmt_iters(active[2]))};
}

double simple_regret(const cli::SeedOutcome& o) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : o.trace->points) best = std::min(best, objective::evaluate_true(o.spec, x));
  return best - o.spec.optimum();
}

Verdict criterion_6() {
  auto c = cli::parse_config(R"(
seeds: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
benchmark: {function: branin2, ambient_dim: 60, noise_std: 0.0}
bo: {budget: 300}
)");
  c.jobs = 1;
  std::vector<double> regret[2];
  for (auto method : {cli::Method::Gtbo, cli::Method::RandomSearch}) {
    c.method = method;
    c.output_dir = work_root() / fmt::format("e2e_{}", cli::name(method));
    fs::remove_all(c.output_dir);
    std::vector<cli::SeedOutcome> outcomes;
    if (cli::run_experiment(c, &outcomes) != cli::kExitOk) throw std::runtime_error("optimization run failed");
    for (const auto& o : outcomes) {
      if (o.trace->values.size() != 300) throw std::runtime_error("budget not spent exactly");
      regret[method == cli::Method::RandomSearch].push_back(simple_regret(o));
    }
  }
  const double g = median(regret[0]), r = median(regret[1]);
  return {g <= 0.1 && g <= r / 10.0, fmt::format("median regret GTBO {:.3g}, random search {:.3g}", g, r)};
}

Verdict criterion_7() {
  using surrogate::GPModel;
  Rng rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Noise-free interpolation and gradients on an embedded Hartmann6 sample.
  const std::size_t D = 8, n = 40;
  const objective::BenchmarkSpec spec{objective::BaseFunction::Hartmann6, D, {0, 1, 2, 3, 4, 5}, 0.0};
  Eigen::MatrixXd X(n, D);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point x(D);
    for (auto& v : x) v = unif(rng);
    for (std::size_t d = 0; d < D; ++d) X(i, d) = x[d];
    y[i] = objective::evaluate_true(spec, x);
  }
  surrogate::GPHyperparameters h;
  h.lengthscales = Eigen::VectorXd::Constant(D, 0.6);
  h.lengthscales[6] = h.lengthscales[7] = 50.0;
  h.noise_variance = 1e-12;
  std::vector<bool> mask{true, true, true, true, true, true, false, false};
  const auto interp = GPModel::condition(X, y, mask, h);
  double interp_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    interp_err = std::max(interp_err, std::abs(interp.predict(std::span<const double>(x.data(), D)).mean - y[i]));
  }

  // Gradients on the noisy model fitted to the recovery data plus the toy model.
  std::vector<GPModel> models{GPModel::condition(X, y, mask, [&] {
    auto g = h;
    g.noise_variance = 1e-3;
    return g;
  }())};

  const auto& outcomes = recovery_outcomes();
  std::vector<double> ratios;
  for (const auto& o : outcomes) {
    const auto& gt = *o.gt;
    const std::size_t dims = gt.x_def.size();
    const auto samples = bo::gt_samples(gt);
    const auto data = bo::dedupe(samples, gt.active_set, 1e-6);
    Eigen::MatrixXd Xg(data.size(), dims);
    Eigen::VectorXd yg(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t d = 0; d < dims; ++d) Xg(i, d) = data[i].x[d];
      yg[i] = data[i].y;
    }
    std::vector<bool> m(dims, false);
    for (auto i : gt.active_set) m[i] = true;
    Rng fit_rng = make_stream(o.seed, 5);
    auto model = surrogate::fit(Xg, yg, m, surrogate::GPPriors{}, fit_rng, bo::BOOptions{}.initial_fit);
    std::vector<double> act, inact;
    for (std::size_t d = 0; d < dims; ++d) (m[d] ? act : inact).push_back(model.hyperparameters().lengthscales[d]);
    ratios.push_back(act.empty() || inact.empty() ? 0.0 : median(inact) / median(act));
    if (models.size() < 4) models.push_back(std::move(model));
  }

  double grad_err = 0.0;
  for (const auto& model : models) {
    const std::size_t dims = model.dims();
    for (int k = 0; k < 5; ++k) {
      Point x(dims);
      for (auto& v : x) v = unif(rng);
      const auto p = model.predict_with_gradient(x);
      double scale = 0.0, err = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        const double step = 1e-5;
        Point a = x, b = x;
        a[d] += step;
        b[d] -= step;
        const double fd = (model.predict(a).mean - model.predict(b).mean) / (2 * step);
        scale = std::max(scale, std::abs(fd));
        err = std::max(err, std::abs(fd - p.mean_gradient[d]));
      }
      grad_err = std::max(grad_err, scale > 0.0 ? err / scale : err);
    }
  }
  const double min_ratio = *std::min_element(ratios.begin(), ratios.end());
  const bool ok = grad_err <= 1e-4 && interp_err <= 1e-6 && min_ratio >= 10.0;
  return {ok, fmt::format("gradient rel error {:.2e}, interpolation error {:.2e}, inactive/active lengthscale "
                          "median ratio min {:.3g} median {:.3g}",
                          grad_err, interp_err, min_ratio, median(ratios))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion_8() {
  auto c = cli::parse_config(R"(
seeds: [0, 1]
benchmark: {function: levy4, ambient_dim: 100, noise_std: 0.1}
bo: {budget: 120}
)");
  std::vector<fs::path> dirs;
  for (std::size_t run = 0; run < 2; ++run) {
    c.output_dir = work_root() / fmt::format("determinism_{}", run);
    c.jobs = run + 1;
    fs::remove_all(c.output_dir);
    if (cli::run_experiment(c) != cli::kExitOk) throw std::runtime_error("determinism run failed");
    dirs.push_back(c.output_dir);
  }
  std::size_t same = 0, total = 0;
  for (auto seed : c.seeds)
    for (auto f : {"marginals.csv", "trace.csv"}) {
      const auto rel = fs::path(fmt::format("seed_{}", seed)) / f;
      const auto a = slurp(dirs[0] / rel);
      ++total;
      same += !a.empty() && a == slurp(dirs[1] / rel);
    }
  return {same == total, fmt::format("{}/{} files byte-identical", same, total)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Verdict()>> criteria{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},
      {5, criterion_5}, {6, criterion_6}, {7, criterion_7}, {8, criterion_8},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [k, _] : criteria) selected.insert(k);

  int failures = 0;
  for (int k : selected) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s (%s; %.0f s)\n", k, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
