#include <benchmark/benchmark.h>

#include "blindsr/elbo.hpp"
#include "blindsr/gem.hpp"
#include "blindsr/kernel.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/rng.hpp"

namespace {

using namespace blindsr;

Image noise_image(int channels, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(channels, h, w);
  for (double& v : img.data()) v = uniform01(rng);
  return img;
}

void BM_Conv2d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int p = static_cast<int>(state.range(1));
  const Image x = noise_image(1, n, n, 1);
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({1.5}), p);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, BoundaryMode::kCircular));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Conv2d)->Args({64, 21})->Args({128, 21})->Args({256, 21})->Args({128, 11});

void BM_BlurDownsample(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image x = noise_image(1, n, n, 2);
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({1.5}), 21);
  for (auto _ : state) {
    benchmark::DoNotOptimize(blur_downsample(x, k, 2, BoundaryMode::kReplicate));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_BlurDownsample)->Arg(64)->Arg(128)->Arg(256);

void BM_BlurDownsampleAdjoint(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image u = noise_image(1, n / 2, n / 2, 3);
  const MixtureKernel k = make_mixture_kernel(BandwidthVector({1.5}), 21);
  for (auto _ : state) {
    benchmark::DoNotOptimize(blur_downsample_adjoint(u, k, 2, BoundaryMode::kReplicate));
  }
}
BENCHMARK(BM_BlurDownsampleAdjoint)->Arg(64)->Arg(128);

void BM_Elbo(benchmark::State& state) {
  const int n_mc = static_cast<int>(state.range(0));
  DegradationConfig cfg;
  const Image x = noise_image(1, 64, 64, 4);
  const Image y = noise_image(1, 32, 32, 5);
  const ExponentialParams q = ExponentialParams::uniform(3, 0.7);
  const ExponentialParams p = ExponentialParams::uniform(3, 0.5);
  const McDraws d = McDraws::generate(n_mc, 3, 6);
  for (auto _ : state) benchmark::DoNotOptimize(elbo(y, x, q, p, cfg, d));
}
BENCHMARK(BM_Elbo)->Arg(1)->Arg(8)->Arg(32);

void BM_GradElboLambda(benchmark::State& state) {
  DegradationConfig cfg;
  const Image x = noise_image(1, 64, 64, 7);
  const Image y = noise_image(1, 32, 32, 8);
  const ExponentialParams q = ExponentialParams::uniform(3, 0.7);
  const ExponentialParams p = ExponentialParams::uniform(3, 0.5);
  const McDraws d = McDraws::generate(8, 3, 9);
  for (auto _ : state) benchmark::DoNotOptimize(grad_elbo_lambda(y, x, q, p, cfg, d));
}
BENCHMARK(BM_GradElboLambda);

void BM_MStepCg(benchmark::State& state) {
  GemConfig cfg;
  cfg.m_cg_iters = static_cast<int>(state.range(0));
  const Image y = noise_image(1, 32, 32, 10);
  const McDraws d = McDraws::generate(cfg.n_mc, 3, 11);
  const Image x0 = upsample_bicubic(y, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m_step(y, cfg.lambda_prior, x0, cfg, d));
  }
}
BENCHMARK(BM_MStepCg)->Arg(5)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
