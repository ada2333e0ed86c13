#include <gtest/gtest.h>

#include <algorithm>

#include "gtbo/gt_engine.hpp"
#include "gtbo/objective.hpp"

using namespace gtbo;

namespace {

struct Problem {
  objective::BenchmarkSpec spec;
  Evaluator f;
  Point x_def;
};

Problem make_problem(objective::BaseFunction base, std::size_t D, double noise, std::uint64_t seed) {
  Rng srng = make_stream(seed, 1);
  auto spec = objective::make_spec(base, D, noise, srng);
  Rng drng = make_stream(seed, 3);
  auto x_def = objective::default_point(spec, objective::DefaultMode::Center, drng);
  return {spec, objective::make_evaluator(spec, make_stream(seed, 2)), x_def};
}

GTConfig small_config() {
  GTConfig c;
  c.particles = 2000;
  c.mc_samples = 1024;
  c.max_tests = 150;
  return c;
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(Helpers, ConvergedAndActiveSet) {
  std::vector<double> m{0.001, 0.95, 0.004, 1.0};
  EXPECT_TRUE(converged(m, 5e-3, 0.9));
  m.push_back(0.5);
  EXPECT_FALSE(converged(m, 5e-3, 0.9));
  EXPECT_EQ(active_set(m, 0.5), (std::vector<std::size_t>{1, 3, 4}));
}

TEST(Helpers, TestPointOnlyMovesGroupCoordinates) {
  Point x_def(30, 0.5);
  auto g = DimMask::from_indices(30, std::vector<std::size_t>{2, 9, 29});
  Rng rng(1);
  const auto x = make_test_point(x_def, g, rng);
  for (std::size_t i = 0; i < 30; ++i) {
    if (g.test(i))
      EXPECT_GE(std::abs(x[i] - 0.5), 0.4);
    else
      EXPECT_EQ(x[i], 0.5);
  }
}

TEST(Config, ValidateRejectsOutOfRange) {
  GTConfig c;
  EXPECT_NO_THROW(c.validate());
  c.prior_q = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.c_lower = 0.95;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.n_def = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.min_distance = 0.6;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GroupTesting, RecoversBraninActiveSetNoiseless) {
  auto pb = make_problem(objective::BaseFunction::Branin2, 30, 0.0, 4);
  Rng rng = make_stream(4, 4);
  const auto res = run_group_testing(pb.f, pb.x_def, small_config(), rng);
  EXPECT_TRUE(res.converged);
  EXPECT_FALSE(res.degenerate);
  EXPECT_EQ(res.active_set, sorted(pb.spec.active_indices));
}

TEST(GroupTesting, RecordAndTrajectoryBookkeeping) {
  auto pb = make_problem(objective::BaseFunction::Levy4, 36, 0.1, 5);
  Rng rng = make_stream(5, 4);
  const auto cfg = small_config();
  std::size_t observed = 0;
  const auto res = run_group_testing(pb.f, pb.x_def, cfg, rng,
                                     [&](const TestRecord& r, std::span<const double> m) {
                                       EXPECT_EQ(r.iteration, ++observed);
                                       EXPECT_EQ(m.size(), 36u);
                                     });
  EXPECT_EQ(observed, res.records.size());
  EXPECT_EQ(res.iterations_used, res.records.size());
  ASSERT_EQ(res.marginal_trajectory.size(), res.records.size() + 1);
  for (double m : res.marginal_trajectory.front()) EXPECT_NEAR(m, cfg.prior_q, 0.03);
  EXPECT_EQ(res.evaluations(), cfg.n_def + bin_count(36) + res.records.size());
  for (std::size_t t = 0; t < res.records.size(); ++t) {
    const auto& r = res.records[t];
    EXPECT_EQ(r.iteration, t + 1);
    EXPECT_FALSE(r.group.none());
    EXPECT_DOUBLE_EQ(r.z, r.y - res.noise_model.f_def_hat);
    for (std::size_t i = 0; i < 36; ++i)
      if (!r.group.test(i)) EXPECT_EQ(r.point[i], pb.x_def[i]);
  }
  if (res.converged) EXPECT_TRUE(converged(res.marginal_trajectory.back(), cfg.c_lower, cfg.c_upper));
}

TEST(GroupTesting, RespectsTestBudget) {
  auto pb = make_problem(objective::BaseFunction::Levy4, 49, 1.0, 6);
  auto cfg = small_config();
  cfg.max_tests = 7;
  Rng rng = make_stream(6, 4);
  const auto res = run_group_testing(pb.f, pb.x_def, cfg, rng);
  EXPECT_LE(res.records.size(), 7u);
}

TEST(GroupTesting, DeterministicForSameSeed) {
  auto run = [] {
    auto pb = make_problem(objective::BaseFunction::Branin2, 25, 0.5, 7);
    Rng rng = make_stream(7, 4);
    return run_group_testing(pb.f, pb.x_def, small_config(), rng);
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    EXPECT_EQ(a.records[t].group, b.records[t].group);
    EXPECT_EQ(a.records[t].y, b.records[t].y);
  }
  EXPECT_EQ(a.marginal_trajectory, b.marginal_trajectory);
}

TEST(GroupTesting, EvaluatorFailureCarriesPartialResult) {
  auto pb = make_problem(objective::BaseFunction::Branin2, 25, 0.0, 8);
  std::size_t calls = 0;
  const std::size_t limit = 10 + bin_count(25) + 4;
  Evaluator flaky = [&](std::span<const double> x) {
    if (++calls > limit) throw std::runtime_error("simulator crashed");
    return pb.f(x);
  };
  Rng rng = make_stream(8, 4);
  try {
    run_group_testing(flaky, pb.x_def, small_config(), rng);
    FAIL() << "expected GTEvaluationError";
  } catch (const GTEvaluationError& e) {
    EXPECT_EQ(e.partial().records.size(), 4u);
    EXPECT_EQ(e.partial().probes.size(), 10 + bin_count(25));
    EXPECT_EQ(e.partial().iterations_used, 4u);
  }
}

TEST(GroupTesting, FailureDuringProbesHasNoRecords) {
  Point x_def(16, 0.5);
  Evaluator broken = [](std::span<const double>) -> double { throw std::runtime_error("down"); };
  Rng rng(9);
  try {
    run_group_testing(broken, x_def, small_config(), rng);
    FAIL() << "expected GTEvaluationError";
  } catch (const GTEvaluationError& e) {
    EXPECT_TRUE(e.partial().records.empty());
  }
}
