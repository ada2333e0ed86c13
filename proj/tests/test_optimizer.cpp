#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gtbo/objective.hpp"
#include "gtbo/optimizer.hpp"

using namespace gtbo;
using namespace gtbo::bo;

namespace {

// phi(u) + u Phi(u) evaluated directly in extended precision.
long double h_direct(long double u) {
  const long double phi = std::exp(-0.5L * u * u) / std::sqrt(2.0L * std::numbers::pi_v<long double>);
  const long double Phi = 0.5L * std::erfc(-u / std::sqrt(2.0L));
  return phi + u * Phi;
}

// log h(u) for u < 0 from h(u) = phi(u) * int_0^inf t exp(-t^2/2 + t u) dt,
// integrated with Simpson on a grid scaled to 1/|u|.
double log_h_integral(double u) {
  const double scale = 1.0 / std::max(1.0, -u);
  const double upper = 60.0 * scale;
  const int n = 200000;
  const double step = upper / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * step;
    const double v = t * std::exp(-0.5 * t * t + t * u);
    acc += v * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  const double integral = acc * step / 3.0;
  return -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(integral);
}

surrogate::GPModel small_model(std::uint64_t seed, std::size_t n = 15, std::size_t d = 3) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X(i, j) = u(rng);
    y[i] = std::pow(X(i, 0) - 0.3, 2) + std::sin(4 * X(i, 1));
  }
  surrogate::GPHyperparameters h;
  h.lengthscales = Eigen::VectorXd::Constant(d, 0.35);
  h.signal_variance = 1.0;
  h.noise_variance = 1e-4;
  return surrogate::GPModel::condition(X, y, std::vector<bool>(d, true), h);
}

}  // namespace

TEST(LogH, MatchesDirectFormulaWhereRepresentable) {
  for (double u = -10.0; u <= 10.0; u += 0.25) {
    const long double h = h_direct(u);
    if (h < 1e-30L) continue;
    EXPECT_NEAR(std::exp(log_h(u)), static_cast<double>(h), 1e-9 * static_cast<double>(h)) << u;
  }
}

TEST(LogH, MatchesIntegralOracleInTheTail) {
  for (double u : {-2.0, -5.0, -15.0, -19.9, -20.1, -40.0, -100.0, -1000.0})
    EXPECT_NEAR(log_h(u), log_h_integral(u), 1e-6 * std::abs(log_h_integral(u))) << u;
}

TEST(LogH, MonotoneAndFinite) {
  double prev = -std::numeric_limits<double>::infinity();
  for (double u = -1e4; u < 50.0; u = u < -100 ? u / 1.5 : u + 0.37) {
    const double v = log_h(u);
    EXPECT_TRUE(std::isfinite(v)) << u;
    EXPECT_GT(v, prev) << u;
    prev = v;
  }
}

TEST(LogEI, ClosedFormAndDegenerateCases) {
  // EI = sigma * h((best - mu) / sigma)
  const double mu = 1.2, var = 0.09, best = 1.0;
  const double sigma = 0.3, u = (best - mu) / sigma;
  const long double ei = sigma * h_direct(u);
  EXPECT_NEAR(std::exp(log_ei(mu, var, best)), static_cast<double>(ei), 1e-12);
  EXPECT_NEAR(log_ei(0.5, 0.0, 1.0), std::log(0.5), 1e-15);
  EXPECT_EQ(log_ei(1.5, 0.0, 1.0), kLogEIFloor);
  EXPECT_GT(log_ei(0.0, 1.0, 1.0), log_ei(0.0, 1.0, 0.5));
  EXPECT_GE(log_ei(1e6, 1e-20, 0.0), kLogEIFloor);
}

TEST(NoisyEI, IncumbentIsMinimumPosteriorMeanAtTrainingInputs) {
  const auto m = small_model(1);
  LogNoisyEI acq(m);
  double mn = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.train_X().rows(); ++i) {
    Eigen::VectorXd row = m.train_X().row(i).transpose();
    mn = std::min(mn, m.predict(std::span<const double>(row.data(), 3)).mean);
  }
  EXPECT_EQ(acq.incumbent(), mn);
}

TEST(NoisyEI, GradientMatchesFiniteDifferences) {
  const auto m = small_model(2);
  LogNoisyEI acq(m);
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    Eigen::VectorXd g;
    const double v = acq.value_and_gradient(x, g);
    EXPECT_NEAR(v, acq(x), 1e-10);
    for (int j = 0; j < 3; ++j) {
      auto xp = x, xm = x;
      xp[j] += 1e-6;
      xm[j] -= 1e-6;
      const double fd = (acq(xp) - acq(xm)) / 2e-6;
      EXPECT_NEAR(g[j], fd, 1e-4 * std::max(1.0, std::abs(fd))) << rep << " " << j;
    }
  }
}

TEST(Acquisition, CandidatesInBoxAndSorted) {
  const auto m = small_model(4);
  LogNoisyEI acq(m);
  Rng rng(5);
  const auto cands = propose_candidates(m, {256, 6, 30}, rng);
  ASSERT_EQ(cands.size(), 6u);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (double v : cands[i]) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (i > 0) EXPECT_GE(acq(cands[i - 1]), acq(cands[i]) - 1e-9);
  }
}

TEST(Acquisition, RefinementBeatsRawCandidates) {
  const auto m = small_model(6);
  LogNoisyEI acq(m);
  Rng a(7), b(7);
  const auto raw = propose(m, {256, 1, 0}, a);
  const auto refined = propose(m, {256, 1, 50}, b);
  EXPECT_GE(acq(refined), acq(raw));
}

TEST(Acquisition, DeterministicForSameRng) {
  const auto m = small_model(8);
  Rng a(9), b(9);
  EXPECT_EQ(propose(m, {}, a), propose(m, {}, b));
}

TEST(Dedupe, MergesOnActiveCoordinatesOnly) {
  std::vector<Sample> s{{{0.1, 0.5, 0.9}, 1.0}, {{0.1, 0.2, 0.9}, 3.0}, {{0.4, 0.5, 0.9}, 5.0},
                        {{0.1 + 1e-8, 0.7, 0.9}, 8.0}};
  std::vector<std::size_t> active{0, 2};
  const auto out = dedupe(s, active);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].x, s[0].x);
  EXPECT_NEAR(out[0].y, 4.0, 1e-15);
  EXPECT_EQ(out[1].y, 5.0);
  EXPECT_THROW(dedupe(s, active, 0.0), std::invalid_argument);
}

TEST(Dedupe, NoActiveSetMergesEverything) {
  std::vector<Sample> s{{{0.1}, 1.0}, {{0.9}, 2.0}};
  EXPECT_EQ(dedupe(s, {}).size(), 1u);
}

TEST(Trace, BestSoFarAndIncumbent) {
  BOTrace t;
  t.append({0.1}, 3.0);
  t.append({0.2}, 1.0);
  t.append({0.3}, 2.0);
  EXPECT_EQ(t.best_so_far, (std::vector<double>{3.0, 1.0, 1.0}));
  EXPECT_EQ(t.incumbent_index(0), 0u);
  EXPECT_EQ(t.incumbent_index(2), 1u);
  EXPECT_EQ(t.incumbent_index(99), 1u);
}

TEST(RandomSearch, BudgetAndBox) {
  Rng rng(10);
  std::size_t calls = 0;
  Evaluator f = [&](std::span<const double> x) {
    ++calls;
    return x[0];
  };
  const auto t = random_search(f, 4, 25, rng);
  EXPECT_EQ(calls, 25u);
  EXPECT_EQ(t.values.size(), 25u);
  for (std::size_t i = 1; i < 25; ++i) EXPECT_LE(t.best_so_far[i], t.best_so_far[i - 1]);
}

TEST(RunBO, ImprovesOnGroupTestingDataAndKeepsLayout) {
  Rng srng(11);
  auto spec = objective::make_spec(objective::BaseFunction::Branin2, 12, 0.0, srng);
  auto f = objective::make_evaluator(spec, make_stream(11, 2));
  GTConfig cfg;
  cfg.particles = 2000;
  cfg.mc_samples = 512;
  Rng grng(12);
  const auto gt = run_group_testing(f, Point(12, 0.5), cfg, grng);
  BOOptions opts;
  opts.initial_fit.restarts = 3;
  Rng brng(13);
  const auto trace = run_bo(f, gt, 25, opts, brng);
  ASSERT_EQ(trace.values.size(), gt.evaluations() + 25);
  EXPECT_EQ(trace.initial_evaluations, gt.evaluations());
  const auto init = gt_samples(gt);
  for (std::size_t i = 0; i < init.size(); ++i) EXPECT_EQ(trace.values[i], init[i].y);
  for (const auto& x : trace.points)
    for (double v : x) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_LT(trace.best_so_far.back() - spec.optimum(), 0.5 * (trace.best_so_far[init.size() - 1] - spec.optimum()));
}

TEST(RunBO, EmptyActiveSetFallsBackToAllDimensions) {
  GTResult gt;
  gt.x_def = Point(4, 0.5);
  Rng rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Evaluator f = [](std::span<const double> x) { return (x[0] - 0.2) * (x[0] - 0.2) + x[3]; };
  for (int i = 0; i < 6; ++i) {
    Probe p;
    p.point = {u(rng), u(rng), u(rng), u(rng)};
    p.y = f(p.point);
    gt.probes.push_back(p);
  }
  BOOptions opts;
  opts.initial_fit.restarts = 2;
  const auto trace = run_bo(f, gt, 5, opts, rng);
  EXPECT_EQ(trace.values.size(), 11u);
}

TEST(RunBO, EvaluatorFailureCarriesPartialTrace) {
  GTResult gt;
  gt.x_def = Point(4, 0.5);
  gt.active_set = {0};
  gt.probes.push_back({Probe::Kind::Default, Point(4, 0.5), 1.0, {}});
  gt.probes.push_back({Probe::Kind::Bin, Point{0.9, 0.5, 0.5, 0.5}, 2.0, {0}});
  int calls = 0;
  Evaluator f = [&](std::span<const double>) -> double {
    if (++calls == 3) throw std::runtime_error("boom");
    return 0.5;
  };
  Rng rng(15);
  try {
    run_bo(f, gt, 10, {}, rng);
    FAIL() << "expected BOEvaluationError";
  } catch (const BOEvaluationError& e) {
    EXPECT_EQ(e.partial().values.size(), 4u);
  }
}
