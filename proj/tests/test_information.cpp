#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gtbo/information.hpp"
#include "oracles.hpp"

using namespace gtbo;

namespace {

NoiseModel noise_model(double sn2, double s2) {
  NoiseModel nm;
  nm.sigma_n_sq = sn2;
  nm.sigma_sq = s2;
  return nm;
}

}  // namespace

TEST(Oracle, QuadratureReproducesGaussianEntropy) {
  EXPECT_NEAR(oracle::mixture_entropy_quadrature(0.0, 1.0, 4.0), 1.4189385332, 1e-8);
  EXPECT_NEAR(oracle::mixture_entropy_quadrature(1.0, 1.0, 4.0), 1.4189385332 + std::log(2.0), 1e-8);
}

TEST(Oracle, QuadratureMutualInformationReferenceValue) {
  // p = 0.5, sigma / sigma_n = 100; below ln 2 because the wide component
  // puts mass near zero where the narrow one lives.
  EXPECT_NEAR(oracle::mutual_information_quadrature(0.5, 1.0, 1e4), 0.6406, 5e-4);
  EXPECT_LT(oracle::mutual_information_quadrature(0.5, 1.0, 1e4), std::log(2.0));
}

TEST(BinaryEntropy, Values) {
  EXPECT_NEAR(binary_entropy(0.5), std::log(2.0), 1e-15);
  EXPECT_EQ(binary_entropy(0.0), 0.0);
  EXPECT_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.1), binary_entropy(0.9), 1e-15);
}

TEST(GmmEntropy, PureComponentsMatchGaussianEntropy) {
  Rng rng(1);
  EXPECT_NEAR(gmm_entropy_mc(0.0, 0.3, 7.0, 100000, rng), oracle::gaussian_entropy(0.3), 0.01);
  EXPECT_NEAR(gmm_entropy_mc(1.0, 0.3, 7.0, 100000, rng), oracle::gaussian_entropy(7.0), 0.01);
}

TEST(GmmEntropy, MatchesQuadratureOnGrid) {
  Rng rng(2);
  for (double p : {0.05, 0.3, 0.7}) {
    for (double ratio : {2.0, 10.0, 100.0}) {
      const double s2 = ratio * ratio * 0.01;
      EXPECT_NEAR(gmm_entropy_mc(p, 0.01, s2, 100000, rng), oracle::mixture_entropy_quadrature(p, 0.01, s2),
                  0.03)
          << "p=" << p << " ratio=" << ratio;
    }
  }
}

TEST(GmmEntropy, RejectsInvalidInput) {
  Rng rng(3);
  EXPECT_THROW(gmm_entropy_mc(0.5, 0.0, 1.0, 10, rng), std::invalid_argument);
  EXPECT_THROW(gmm_entropy_mc(1.5, 1.0, 1.0, 10, rng), std::invalid_argument);
  EXPECT_THROW(gmm_entropy_mc(0.5, 1.0, 1.0, 0, rng), std::invalid_argument);
}

TEST(MutualInformationFunction, MatchesQuadrature) {
  Rng rng(4);
  const auto est = mutual_information(0.5, noise_model(1.0, 1e4), 100000, rng);
  EXPECT_NEAR(est.value, oracle::mutual_information_quadrature(0.5, 1.0, 1e4), 0.02);
  EXPECT_EQ(est.mc_samples, 100000u);
  EXPECT_EQ(est.p_active, 0.5);
}

TEST(MutualInformationFunction, EqualVariancesCarryNoInformation) {
  Rng rng(5);
  const auto est = mutual_information(0.4, noise_model(2.0, 2.0), 1000, rng);
  EXPECT_EQ(est.value, 0.0);
  EXPECT_EQ(est.raw, 0.0);
}

TEST(MutualInformationCRN, MatchesQuadratureOnGrid) {
  Rng rng(6);
  MutualInformation mi(noise_model(0.01, 1.0), 20000, rng);
  for (double p : {0.02, 0.1, 0.3, 0.5, 0.8, 0.95})
    EXPECT_NEAR(mi(p), oracle::mutual_information_quadrature(p, 0.01, 1.0), 0.01) << p;
}

TEST(MutualInformationCRN, ExactZeroAtDeterministicOutcomes) {
  Rng rng(7);
  MutualInformation mi(noise_model(0.01, 1.0), 512, rng);
  EXPECT_EQ(mi(0.0), 0.0);
  EXPECT_EQ(mi(1.0), 0.0);
  MutualInformation same(noise_model(1.0, 1.0), 512, rng);
  EXPECT_EQ(same(0.5), 0.0);
}

TEST(MutualInformationCRN, DeterministicAndBoundedByBinaryEntropy) {
  Rng rng(8);
  MutualInformation mi(noise_model(1e-4, 10.0), 2048, rng);
  for (int i = 1; i < 50; ++i) {
    const double p = i / 50.0;
    const double v = mi(p);
    EXPECT_EQ(v, mi(p));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, binary_entropy(p) + 0.02);
  }
}

TEST(MutualInformationCRN, BoundHoldsOnRatioGrid) {
  for (double ratio : {1.5, 3.0, 10.0, 100.0, 1000.0}) {
    Rng rng(9);
    MutualInformation mi(noise_model(1.0, ratio * ratio), 4096, rng);
    for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) {
      EXPECT_LE(mi(p), binary_entropy(p) + 0.02);
      EXPECT_NEAR(mi(p), oracle::mutual_information_quadrature(p, 1.0, ratio * ratio), 0.03)
          << "p=" << p << " ratio=" << ratio;
    }
  }
}

TEST(MutualInformationCRN, IncreasesWithSignalToNoise) {
  Rng rng(10);
  double prev = 0.0;
  for (double ratio : {1.5, 3.0, 10.0, 100.0}) {
    Rng r = rng;
    MutualInformation mi(noise_model(1.0, ratio * ratio), 4096, r);
    EXPECT_GT(mi(0.5), prev);
    prev = mi(0.5);
  }
}
