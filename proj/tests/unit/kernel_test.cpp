#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "blindsr/errors.hpp"
#include "blindsr/kernel.hpp"
#include "blindsr/rng.hpp"
#include "support/oracles.hpp"

namespace blindsr {
namespace {

using testing::mixture_kernel_oracle;
using testing::rel_err;

TEST(MixtureKernelTest, SingleCell) {
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({0.7, 3.0}), 1);
  ASSERT_EQ(k.support(), 1);
  EXPECT_EQ(k.at(0, 0), 1.0);
}

TEST(MixtureKernelTest, EqualComponentsCollapse) {
  const MixtureKernel two = make_mixture_kernel(BandwidthVector({1.3, 1.3}), 9);
  const MixtureKernel one = make_mixture_kernel(BandwidthVector({1.3}), 9);
  for (std::size_t i = 0; i < one.grid().size(); ++i) {
    EXPECT_NEAR(two.grid()[i], one.grid()[i], 1e-15);
  }
}

TEST(MixtureKernelTest, MatchesScalarOracle) {
  for (const auto& b2 : std::vector<std::vector<double>>{
           {0.5}, {0.2, 2.5}, {1.0, 0.3, 4.0}}) {
    for (int p : {5, 11, 21}) {
      const MixtureKernel k = make_mixture_kernel(BandwidthVector(b2), p);
      const std::vector<double> want = mixture_kernel_oracle(b2, p);
      ASSERT_EQ(k.grid().size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(k.grid()[i], want[i], 1e-12);
      }
      EXPECT_EQ(k.source_b2(), BandwidthVector(b2));
    }
  }
}

TEST(MixtureKernelTest, InvariantsOnRandomBandwidths) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 8.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> b2(1 + t % 3);
    for (double& v : b2) v = u(rng);
    const int p = 2 * (t % 6) + 3;
    const MixtureKernel k = make_mixture_kernel(BandwidthVector(b2), p);
    double sum = 0.0;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        EXPECT_GE(k.at(i, j), 0.0);
        EXPECT_EQ(k.at(i, j), k.at(p - 1 - i, p - 1 - j));
        sum += k.at(i, j);
      }
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(MixtureKernelTest, CenterWeightDecreasesWithBandwidth) {
  double prev = 2.0;
  for (double b2 = 0.05; b2 < 10.0; b2 *= 1.3) {
    const MixtureKernel k = make_mixture_kernel(BandwidthVector({b2}), 7);
    EXPECT_LT(k.at(3, 3), prev) << b2;
    prev = k.at(3, 3);
  }
}

TEST(MixtureKernelTest, RejectsBadInput) {
  EXPECT_THROW(BandwidthVector({1.0, 0.0}), DomainError);
  EXPECT_THROW(BandwidthVector({-1.0}), DomainError);
  EXPECT_THROW(BandwidthVector(std::vector<double>{}), DomainError);
  EXPECT_THROW(make_mixture_kernel(BandwidthVector({1.0}), 4), DimensionError);
  EXPECT_THROW(make_mixture_kernel(BandwidthVector({1.0}), 0), DimensionError);
}

TEST(SampleBandwidthsTest, Examples) {
  const ExponentialParams one({1.0});
  const double xi0[] = {0.0};
  EXPECT_EQ(sample_bandwidths(one, xi0)[0], kBandwidthFloor);
  const double xi1[] = {1.0 - std::exp(-1.0)};
  EXPECT_NEAR(sample_bandwidths(one, xi1)[0], 1.0, 1e-12);
  const double xi2[] = {0.5};
  const double b2 = sample_bandwidths(ExponentialParams({2.0}), xi2)[0];
  EXPECT_NEAR(b2, std::log(2.0) / 2.0, 1e-12);
  // CDF of the rate-2 exponential at the draw gives back the uniform.
  EXPECT_NEAR(1.0 - std::exp(-2.0 * b2), 0.5, 1e-12);
}

TEST(SampleBandwidthsTest, RejectsOutOfRangeUniforms) {
  const ExponentialParams r({1.0, 1.0});
  const double bad_hi[] = {0.2, 1.0};
  const double bad_lo[] = {-0.1, 0.3};
  const double short_xi[] = {0.2};
  EXPECT_THROW(sample_bandwidths(r, bad_hi), DomainError);
  EXPECT_THROW(sample_bandwidths(r, bad_lo), DomainError);
  EXPECT_THROW(sample_bandwidths(r, short_xi), DimensionError);
}

double ks_statistic(std::vector<double> draws, double rate) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = 1.0 - std::exp(-rate * draws[i]);
    d = std::max({d, std::abs((i + 1) / n - f), std::abs(f - i / n)});
  }
  return d;
}

TEST(SampleBandwidthsTest, KolmogorovSmirnov) {
  for (double rate : {0.25, 1.0, 4.0}) {
    Rng rng(derive_seed(7, "ks"));
    const ExponentialParams r({rate});
    std::vector<double> draws(100000);
    for (double& v : draws) {
      const double xi[] = {uniform01(rng)};
      v = sample_bandwidths(r, xi)[0];
    }
    EXPECT_LT(ks_statistic(draws, rate), 0.01) << rate;
  }
}

TEST(SampleBandwidthsTest, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::uniform_real_distribution<double> lr(0.1, 5.0);
  for (int t = 0; t < 20; ++t) {
    const double xi[] = {u(rng), u(rng)};
    const std::vector<double> rates{lr(rng), lr(rng)};
    const auto d = sample_bandwidths_derivative(ExponentialParams(rates), xi);
    for (int l = 0; l < 2; ++l) {
      const double h = 1e-6 * rates[l];
      auto plus = rates;
      auto minus = rates;
      plus[l] += h;
      minus[l] -= h;
      const double fd = (sample_bandwidths(ExponentialParams(plus), xi)[l] -
                         sample_bandwidths(ExponentialParams(minus), xi)[l]) /
                        (2 * h);
      EXPECT_LT(rel_err(d[l], fd), 1e-6);
      EXPECT_NEAR(d[l], std::log(1.0 - xi[l]) / (rates[l] * rates[l]), 1e-12);
    }
  }
}

TEST(KlExponentialTest, ClosedFormValues) {
  EXPECT_EQ(kl_exponential(ExponentialParams({0.7}), ExponentialParams({0.7})),
            0.0);
  EXPECT_NEAR(kl_exponential(ExponentialParams({1.0}), ExponentialParams({2.0})),
              0.306853, 1e-6);
  EXPECT_NEAR(kl_exponential(ExponentialParams({2.0}), ExponentialParams({1.0})),
              0.193147, 1e-6);
}

// E_q[ln q(t) - ln p(t)] with t ~ Exp(q), independent of the closed form.
std::pair<double, double> kl_monte_carlo(double q, double p, int n,
                                         std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = -std::log1p(-uniform01(rng)) / q;
    const double v = (std::log(q) - q * t) - (std::log(p) - p * t);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = (sq / n - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

TEST(KlExponentialTest, MatchesMonteCarlo) {
  for (auto [q, p] : {std::pair{1.0, 2.0}, std::pair{2.0, 1.0},
                      std::pair{0.3, 0.5}}) {
    const auto [mean, se] = kl_monte_carlo(q, p, 1000000, 11);
    EXPECT_LT(std::abs(kl_exponential(ExponentialParams({q}),
                                      ExponentialParams({p})) -
                       mean),
              3 * se);
  }
}

TEST(KlExponentialTest, NonnegativeAndZeroOnlyOnDiagonal) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int t = 0; t < 1000; ++t) {
    const ExponentialParams q({u(rng), u(rng)});
    const ExponentialParams p({u(rng), u(rng)});
    EXPECT_GT(kl_exponential(q, p), 0.0);
    EXPECT_EQ(kl_exponential(q, q), 0.0);
  }
}

TEST(KlExponentialTest, GradientMatchesFiniteDifference) {
  const ExponentialParams p({0.5, 2.0});
  const std::vector<double> q{1.3, 0.4};
  const auto g = kl_exponential_gradient(ExponentialParams(q), p);
  for (int l = 0; l < 2; ++l) {
    auto plus = q;
    auto minus = q;
    plus[l] += 1e-6;
    minus[l] -= 1e-6;
    const double fd = (kl_exponential(ExponentialParams(plus), p) -
                       kl_exponential(ExponentialParams(minus), p)) /
                      2e-6;
    EXPECT_LT(rel_err(g[l], fd), 1e-7);
  }
}

TEST(KlExponentialTest, RejectsMismatch) {
  EXPECT_THROW(kl_exponential(ExponentialParams({1.0}),
                              ExponentialParams({1.0, 2.0})),
               DomainError);
  EXPECT_THROW(ExponentialParams({0.0}), DomainError);
  EXPECT_THROW(ExponentialParams({std::nan("")}), DomainError);
}

TEST(PosteriorMeanTest, Examples) {
  EXPECT_EQ(posterior_mean_bandwidth(ExponentialParams({1.0}))[0], 1.0);
  EXPECT_EQ(posterior_mean_bandwidth(ExponentialParams({0.25}))[0], 4.0);
  Rng rng(5);
  const ExponentialParams r({2.0});
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double xi[] = {uniform01(rng)};
    sum += sample_bandwidths(r, xi)[0];
  }
  EXPECT_LT(rel_err(sum / n, posterior_mean_bandwidth(r)[0]), 0.01);
}

TEST(KernelTextTest, RoundTripIsLossless) {
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({0.37, 2.9}), 9);
  const Kernel back = parse_kernel_text(format_kernel_text(k));
  EXPECT_EQ(back, static_cast<const Kernel&>(k));

  const auto dir = std::filesystem::temp_directory_path() / "blindsr_kernel_test";
  std::filesystem::create_directories(dir);
  write_kernel_text(dir / "k.txt", k);
  EXPECT_EQ(read_kernel_text(dir / "k.txt"), static_cast<const Kernel&>(k));
  std::filesystem::remove_all(dir);
}

TEST(KernelTextTest, RejectsMalformed) {
  EXPECT_THROW(parse_kernel_text("3 3\n1 0 0\n"), IoError);
  EXPECT_THROW(parse_kernel_text("2 3\n"), DimensionError);
  EXPECT_THROW(parse_kernel_text("1 1\nabc\n"), IoError);
  EXPECT_THROW(parse_kernel_text("1 1\n0.5\n"), DomainError);
}

TEST(KernelTextTest, ResizeSupport) {
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({0.5}), 5);
  const Kernel big = resize_kernel_support(k, 9);
  EXPECT_EQ(big.support(), 9);
  EXPECT_EQ(big.at(0, 0), 0.0);
  EXPECT_EQ(big.at(4, 4), k.at(2, 2));
  EXPECT_EQ(resize_kernel_support(big, 5), static_cast<const Kernel&>(k));
  EXPECT_THROW(resize_kernel_support(k, 3), DimensionError);
}

}  // namespace
}  // namespace blindsr
