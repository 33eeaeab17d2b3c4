#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "blindsr/errors.hpp"
#include "blindsr/estimators.hpp"
#include "blindsr/gem.hpp"
#include "blindsr/metrics.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

namespace blindsr {
namespace {

using testing::random_image;
using testing::shapes_scene;

// Features from their definitions; the spectrum is a direct O(N^2) DFT.
std::array<double, kFeatureCount> features_oracle(const Image& y) {
  const int h = y.height();
  const int w = y.width();
  const double n = h * w;
  std::array<double, kFeatureCount> f{};
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) f[0] += y(0, i, j) / n;
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double c = y(0, i, j);
      f[1] += (c - f[0]) * (c - f[0]) / n;
      f[2] += std::abs(y(0, i, (j + 1) % w) - c) / n;
      f[3] += std::abs(y(0, (i + 1) % h, j) - c) / n;
      f[4] += std::abs(y(0, (i + h - 1) % h, j) + y(0, (i + 1) % h, j) +
                       y(0, i, (j + w - 1) % w) + y(0, i, (j + 1) % w) - 4 * c) /
              n;
    }
  }
  f[1] = std::sqrt(f[1]);
  double total = 0.0;
  double high = 0.0;
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      if (u == 0 && v == 0) continue;
      std::complex<double> acc = 0.0;
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const double ph = -2 * std::numbers::pi * (double(u) * i / h + double(v) * j / w);
          acc += y(0, i, j) * std::complex<double>(std::cos(ph), std::sin(ph));
        }
      }
      const double fu = (u <= h / 2 ? u : u - h) / double(h);
      const double fv = (v <= w / 2 ? v : v - w) / double(w);
      total += std::norm(acc);
      if (std::hypot(fu, fv) > 0.25) high += std::norm(acc);
    }
  }
  f[5] = high / total;
  return f;
}

EstimatorParams random_params(int components, int support, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  EstimatorParams p = EstimatorParams::zeros(components, support);
  for (double& v : p.weights) v = g(gen);
  for (double& v : p.bias) v = g(gen);
  return p;
}

DegradationConfig small_cfg(int support = 5, double sigma = 0.01) {
  DegradationConfig cfg;
  cfg.support = support;
  cfg.sigma_n = sigma;
  return cfg;
}

LabeledSample make_pair(int n, double b2, std::uint64_t seed,
                        const DegradationConfig& cfg, bool with_kernel) {
  LabeledSample s;
  s.x = shapes_scene(n, n, seed);
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({b2}), cfg.support);
  Rng rng(seed + 1);
  s.y = degrade(s.x, k, cfg, rng);
  if (with_kernel) s.kernel = k;
  return s;
}

TEST(SoftplusTest, ValuesAndInverse) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(50.0), 50.0, 1e-12);
  EXPECT_NEAR(softplus(-50.0), std::exp(-50.0), 1e-30);
  for (double v : {1e-4, 0.3, 2.0, 40.0}) {
    EXPECT_NEAR(softplus(softplus_inverse(v)), v, 1e-12 * std::max(1.0, v));
  }
  EXPECT_THROW(softplus_inverse(0.0), DomainError);
}

TEST(FeaturesTest, MatchDefinitionOracle) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 3; ++t) {
    const Image y = random_image(1, 8 + t, 10, gen);
    const auto want = features_oracle(y);
    const FeatureVector got = extract_features(y);
    for (int q = 0; q < kFeatureCount; ++q) {
      EXPECT_NEAR(got.psi[q], want[q], 1e-12) << q;
    }
  }
}

TEST(FeaturesTest, ColorInputUsesLuma) {
  std::mt19937_64 gen(2);
  const Image rgb = random_image(3, 8, 8, gen);
  const FeatureVector a = extract_features(rgb);
  const FeatureVector b = extract_features(rgb_to_y(rgb));
  EXPECT_EQ(a.psi, b.psi);
}

TEST(PredictLambdaTest, ZeroParameters) {
  std::mt19937_64 gen(3);
  const EstimatorParams p = EstimatorParams::zeros(3, 21);
  const ExponentialParams lam = predict_lambda(p, random_image(1, 8, 8, gen));
  for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(lam[l], 0.693148, 1e-6);
}

TEST(PredictLambdaTest, ShiftInvariant) {
  const Image y = shapes_scene(16, 16, 4);
  const EstimatorParams p = random_params(3, 21, 5);
  const ExponentialParams a = predict_lambda(p, y);
  const ExponentialParams b = predict_lambda(p, shift_circular(y, 3, -5));
  for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(a[l], b[l], 1e-12);
}

TEST(PredictLambdaTest, MatchesScalarRecomputation) {
  const Image y = shapes_scene(12, 12, 6);
  const EstimatorParams p = random_params(2, 21, 7);
  const auto psi = features_oracle(y);
  const ExponentialParams got = predict_lambda(p, y);
  for (int l = 0; l < 2; ++l) {
    double z = p.bias[l];
    for (int q = 0; q < kFeatureCount; ++q) z += p.weights[l * kFeatureCount + q] * psi[q];
    EXPECT_NEAR(got[l], std::log1p(std::exp(z)) + 1e-6, 1e-10);
  }
}

TEST(RestoreTest, ManyStepsMatchNonblindSolve) {
  const DegradationConfig cfg = small_cfg(7);
  const LabeledSample s = make_pair(16, 1.2, 8, cfg, false);
  EstimatorParams p = EstimatorParams::zeros(1, 7, 400, softplus_inverse(0.05));
  GemConfig g;
  g.degradation = cfg;
  g.lambda_prior = ExponentialParams({0.5});
  g.ridge = 0.05;
  g.m_cg_iters = 400;
  const BandwidthVector b2({1.2});
  const Image a = restore(p, s.y, b2, cfg);
  const Image b = solve_nonblind(s.y, b2, g);
  EXPECT_LT(norm(a - b) / norm(b), 1e-6);
}

TEST(RestoreTest, DeltaKernelTinyRidgeGivesObservation) {
  DegradationConfig cfg = small_cfg(1);
  cfg.scale = 1;
  std::mt19937_64 gen(9);
  const Image y = random_image(1, 10, 10, gen);
  const EstimatorParams p = EstimatorParams::zeros(1, 1, 3, -30.0);
  const Image x = restore(p, y, BandwidthVector({2.0}), cfg);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(x.data()[i], y.data()[i], 1e-9);
}

TEST(RestoreTest, ContinuousInLogRidge) {
  const DegradationConfig cfg = small_cfg(7);
  const LabeledSample s = make_pair(16, 1.5, 10, cfg, false);
  EstimatorParams p = EstimatorParams::zeros(1, 7, 5, -2.0);
  const Image a = restore(p, s.y, BandwidthVector({1.5}), cfg);
  p.log_ridge += 1e-6;
  const Image b = restore(p, s.y, BandwidthVector({1.5}), cfg);
  EXPECT_LT(std::abs(norm(a) - norm(b)), 1e-3);
  for (double v : a.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(RestoreTest, RejectsSupportMismatch) {
  const DegradationConfig cfg = small_cfg(7);
  std::mt19937_64 gen(11);
  EXPECT_THROW(restore(EstimatorParams::zeros(1, 5), random_image(1, 8, 8, gen),
                       BandwidthVector({1.0}), cfg),
               DimensionError);
}

TEST(LossGemTest, SingleDrawEqualsNegativeElbo) {
  const DegradationConfig cfg = small_cfg(5, 0.02);
  const LabeledSample s = make_pair(16, 1.0, 12, cfg, false);
  const EstimatorParams p = random_params(2, 5, 13);
  const ExponentialParams prior({0.5, 0.5});
  const McDraws d(1, 2, {0.3, 0.8});
  const ExponentialParams lam = predict_lambda(p, s.y);
  const Image xr = restore(p, s.y, sample_bandwidths(lam, d.row(0)), cfg);
  const std::vector<Image> batch{s.y};
  EXPECT_NEAR(loss_gem(p, batch, prior, cfg, d),
              -elbo(s.y, xr, lam, prior, cfg, d).value, 1e-9);
}

TEST(LossGemTest, PriorRatesAndExactFitGiveGaussianConstant) {
  DegradationConfig cfg = small_cfg(1, 0.1);
  cfg.scale = 1;
  std::mt19937_64 gen(14);
  const Image y = random_image(1, 6, 6, gen);
  const ExponentialParams prior({0.5});
  EstimatorParams p = EstimatorParams::zeros(1, 1, 2, -40.0);
  p.bias[0] = softplus_inverse(0.5 - 1e-6);
  const std::vector<Image> batch{y};
  const double want = -36.0 * (-0.5 * std::log(2 * std::numbers::pi * 0.01));
  EXPECT_NEAR(loss_gem(p, batch, prior, cfg, McDraws::generate(3, 1, 1)), want,
              1e-9);
}

TEST(LossGemTest, BatchOrderInvariantAndNonEmpty) {
  const DegradationConfig cfg = small_cfg(5, 0.02);
  std::vector<Image> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(make_pair(16, 0.5 + i, 20 + i, cfg, false).y);
  const EstimatorParams p = random_params(1, 5, 15);
  const ExponentialParams prior({0.5});
  const McDraws d = McDraws::generate(2, 1, 16);
  const double a = loss_gem(p, batch, prior, cfg, d);
  std::swap(batch[0], batch[2]);
  EXPECT_NEAR(loss_gem(p, batch, prior, cfg, d), a, 1e-12 * std::abs(a));
  EXPECT_THROW(loss_gem(p, std::vector<Image>{}, prior, cfg, d), DomainError);
}

TEST(LossSupTest, ZeroWhenRestorerIsExactAndOffsetGivesPointZeroOne) {
  const DegradationConfig cfg = small_cfg(5);
  LabeledSample s = make_pair(16, 1.0, 30, cfg, false);
  const EstimatorParams p = random_params(1, 5, 31);
  const McDraws d(1, 1, {0.4});
  const Image xr =
      restore(p, s.y, sample_bandwidths(predict_lambda(p, s.y), d.row(0)), cfg);
  s.x = xr;
  const std::vector<LabeledSample> exact{s};
  EXPECT_EQ(loss_sup(p, exact, cfg, d), 0.0);
  s.x = xr + Image(1, 16, 16, 0.1);
  const std::vector<LabeledSample> offset{s};
  EXPECT_NEAR(loss_sup(p, offset, cfg, d), 0.01, 1e-12);
}

TEST(LossSupTest, MatchesHandComputedTwoPairBatch) {
  const DegradationConfig cfg = small_cfg(5);
  const std::vector<LabeledSample> batch{make_pair(16, 1.0, 32, cfg, false),
                                         make_pair(16, 2.5, 33, cfg, false)};
  const EstimatorParams p = random_params(2, 5, 34);
  const McDraws d = McDraws::generate(2, 2, 35);
  double want = 0.0;
  for (const auto& s : batch) {
    const ExponentialParams lam = predict_lambda(p, s.y);
    for (int m = 0; m < 2; ++m) {
      const Image xr = restore(p, s.y, sample_bandwidths(lam, d.row(m)), cfg);
      double se = 0.0;
      for (std::size_t i = 0; i < xr.size(); ++i) {
        se += (xr.data()[i] - s.x.data()[i]) * (xr.data()[i] - s.x.data()[i]);
      }
      want += se / xr.size() / 2.0 / 2.0;
    }
  }
  EXPECT_NEAR(loss_sup(p, batch, cfg, d), want, 1e-12);
}

TEST(LossSupKernelTest, ExactKernelAddsNothing) {
  const DegradationConfig cfg = small_cfg(5);
  LabeledSample s = make_pair(16, 1.0, 40, cfg, false);
  const EstimatorParams p = random_params(1, 5, 41);
  const McDraws d(1, 1, {0.6});
  const BandwidthVector b2 = sample_bandwidths(predict_lambda(p, s.y), d.row(0));
  s.kernel = make_mixture_kernel(b2, 5);
  const std::vector<LabeledSample> batch{s};
  EXPECT_NEAR(loss_sup_kernel(p, batch, cfg, d), loss_sup(p, batch, cfg, d), 1e-15);
}

TEST(LossSupKernelTest, MatchesHandComputationOnSmallKernels) {
  const DegradationConfig cfg = small_cfg(3);
  LabeledSample s = make_pair(16, 1.0, 42, cfg, false);
  s.kernel = Kernel::from_grid(3, {0, 0.1, 0, 0.1, 0.6, 0.1, 0, 0.1, 0});
  const EstimatorParams p = random_params(1, 3, 43);
  const McDraws d(1, 1, {0.25});
  const BandwidthVector b2 = sample_bandwidths(predict_lambda(p, s.y), d.row(0));
  const MixtureKernel kb = make_mixture_kernel(b2, 3);
  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double diff = s.kernel->at(i, j) - kb.at(i, j);
      want += diff * diff;
    }
  }
  const std::vector<LabeledSample> batch{s};
  const double kernel_term =
      loss_sup_kernel(p, batch, cfg, d) - loss_sup(p, batch, cfg, d);
  EXPECT_NEAR(kernel_term, want, 1e-12);
  EXPECT_LE(kernel_term, 2.0);
}

TEST(LossSupKernelTest, PadsSmallerGroundTruthAndRejectsLarger) {
  const DegradationConfig cfg = small_cfg(7);
  LabeledSample s = make_pair(16, 1.0, 44, cfg, false);
  const EstimatorParams p = random_params(1, 7, 45);
  const McDraws d(1, 1, {0.5});
  s.kernel = make_mixture_kernel(BandwidthVector({0.3}), 3);
  EXPECT_NO_THROW(loss_sup_kernel(p, std::vector<LabeledSample>{s}, cfg, d));
  s.kernel = make_mixture_kernel(BandwidthVector({0.3}), 11);
  EXPECT_THROW(loss_sup_kernel(p, std::vector<LabeledSample>{s}, cfg, d),
               DimensionError);
}

TrainingSet small_set(const DegradationConfig& cfg, int labeled, int unlabeled,
                      int n = 16) {
  TrainingSet data;
  for (int i = 0; i < labeled; ++i) {
    data.labeled.push_back(make_pair(n, 0.6 + 0.4 * i, 100 + i, cfg, i % 2 == 0));
  }
  for (int i = 0; i < unlabeled; ++i) {
    data.unlabeled.push_back(make_pair(n, 1.0 + 0.3 * i, 200 + i, cfg, false).y);
  }
  return data;
}

TEST(TotalLossTest, WeightsCombineLinearly) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 2, 2);
  const EstimatorParams p = random_params(1, 5, 50);
  const ExponentialParams prior({0.5});
  const McDraws d = McDraws::generate(2, 1, 51);
  std::vector<Image> lr;
  for (const auto& s : data.labeled) lr.push_back(s.y);
  lr.insert(lr.end(), data.unlabeled.begin(), data.unlabeled.end());
  const double gem = loss_gem(p, lr, prior, cfg, d);
  EXPECT_NEAR(total_loss(p, data, {1.0, 0.0}, prior, cfg, d), gem,
              1e-12 * std::abs(gem));
  const double sup_only = total_loss(p, data, {0.0, 1.0}, prior, cfg, d);
  // Sample 0 carries a kernel, sample 1 does not.
  const double want_sup =
      loss_sup(p, data.labeled, cfg, d) +
      (loss_sup_kernel(p, std::span(data.labeled).first(1), cfg, d) -
       loss_sup(p, std::span(data.labeled).first(1), cfg, d));
  EXPECT_NEAR(sup_only, want_sup, 1e-12);
  const double a = total_loss(p, data, {2.0, 0.7}, prior, cfg, d);
  const double b = total_loss(p, data, {1.0, 0.7}, prior, cfg, d);
  EXPECT_NEAR(a - b, gem, 1e-9 * std::abs(gem));
  EXPECT_THROW(total_loss(p, data, {0.0, 0.0}, prior, cfg, d), DomainError);
  EXPECT_THROW(total_loss(p, TrainingSet{}, {1.0, 1.0}, prior, cfg, d),
               DomainError);
}

TEST(UnsupervisedRateTest, FractionOfUnlabeled) {
  EXPECT_EQ(unsupervised_rate(8, 0), 0.0);
  EXPECT_EQ(unsupervised_rate(8, 8), 0.5);
  EXPECT_EQ(unsupervised_rate(8, 32), 0.8);
  EXPECT_THROW(unsupervised_rate(0, 0), DomainError);
}

TEST(ParamsTest, FlattenAssignAndJsonRoundTrip) {
  EstimatorParams p = random_params(3, 21, 60);
  p.log_ridge = -1.25;
  EXPECT_EQ(p.parameter_count(), 6u * 3 + 3 + 1);
  EstimatorParams q = EstimatorParams::zeros(3, 21);
  q.assign(p.flatten());
  EXPECT_EQ(q, p);
  EXPECT_EQ(parse_params(serialize_params(p)), p);
  const auto path = std::filesystem::temp_directory_path() / "blindsr_params_test.json";
  write_params(path, p);
  EXPECT_EQ(read_params(path), p);
  std::filesystem::remove(path);
  EXPECT_THROW(parse_params("{\"L\": 1}"), IoError);
  EXPECT_THROW(q.assign(std::vector<double>(3, 0.0)), DimensionError);
}

TEST(TrainTest, FiniteDifferenceStepHalvingConsistency) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 2, 1);
  const EstimatorParams p = random_params(1, 5, 70);
  const ExponentialParams prior({0.5});
  const McDraws d = McDraws::generate(2, 1, 71);
  const LossWeights w{1.0, 1.0};
  const auto g1 = finite_difference_gradient(p, data, w, prior, cfg, d, 1e-4);
  const auto g2 = finite_difference_gradient(p, data, w, prior, cfg, d, 5e-5);
  ASSERT_EQ(g1.size(), 8u);
  double scale = 0.0;
  for (double v : g1) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 0; j < g1.size(); ++j) {
    EXPECT_LE(std::abs(g1[j] - g2[j]), 0.01 * std::max(std::abs(g1[j]), 1e-3 * scale))
        << j;
  }
}

TEST(TrainTest, ZeroLearningRateKeepsParameters) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 2, 1);
  const EstimatorParams init = random_params(1, 5, 80);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  tc.learning_rate = 0.0;
  const TrainResult r = train(data, {1.0, 1.0}, tc, init, ExponentialParams({0.5}), cfg);
  EXPECT_EQ(r.params, init);
  ASSERT_EQ(r.curve.size(), 3u);
  EXPECT_EQ(r.curve[0], r.curve[1]);
  EXPECT_EQ(r.curve[1], r.curve[2]);
  EXPECT_NEAR(r.eta, 1.0 / 3.0, 1e-15);
}

TEST(TrainTest, ZeroEpochsReturnsInitialParameters) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 1, 0);
  const EstimatorParams init = random_params(1, 5, 81);
  TrainConfig tc;
  tc.epochs = 0;
  const TrainResult r = train(data, {1.0, 1.0}, tc, init, ExponentialParams({0.5}), cfg);
  EXPECT_EQ(r.params, init);
  EXPECT_EQ(r.curve.size(), 1u);
  EXPECT_EQ(r.steps, 0);
}

TEST(TrainTest, DeterministicAndDecreasing) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 3, 2);
  TrainConfig tc;
  tc.epochs = 6;
  tc.batch_size = 2;
  tc.learning_rate = 0.05;
  tc.seed = 5;
  const EstimatorParams init = EstimatorParams::zeros(1, 5);
  const TrainResult a = train(data, {1.0, 1.0}, tc, init, ExponentialParams({0.5}), cfg);
  const TrainResult b = train(data, {1.0, 1.0}, tc, init, ExponentialParams({0.5}), cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.curve, b.curve);
  EXPECT_LT(a.curve.back(), a.curve.front());
  EXPECT_EQ(a.steps, 6 * 3);
}

TEST(TrainTest, RejectsBadConfiguration) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 0, 2);
  TrainConfig tc;
  EXPECT_THROW(train(data, {0.0, 1.0}, tc, EstimatorParams::zeros(1, 5),
                     ExponentialParams({0.5}), cfg),
               DomainError);
  EXPECT_THROW(train(data, {1.0, 1.0}, tc, EstimatorParams::zeros(1, 7),
                     ExponentialParams({0.5}), cfg),
               DimensionError);
  tc.learning_rate = -1.0;
  EXPECT_THROW(train(data, {1.0, 1.0}, tc, EstimatorParams::zeros(1, 5),
                     ExponentialParams({0.5}), cfg),
               DomainError);
}

TEST(TrainTest, DivergenceIsReported) {
  const DegradationConfig cfg = small_cfg(5);
  const TrainingSet data = small_set(cfg, 2, 0);
  TrainConfig tc;
  tc.epochs = 1;
  tc.divergence_threshold = -1e9;
  EXPECT_THROW(train(data, {1.0, 1.0}, tc, EstimatorParams::zeros(1, 5),
                     ExponentialParams({0.5}), cfg),
               DivergenceError);
}

}  // namespace
}  // namespace blindsr
