#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "dkrg/deep_kriging.hpp"
#include "dkrg/kriging.hpp"
#include "dkrg/local_kriging.hpp"
#include "dkrg/nn/ops.hpp"
#include "dkrg/resample.hpp"
#include "dkrg/uncertainty.hpp"

using namespace dkrg;

namespace {

Image test_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img(y, x) = 128.0 + 60.0 * std::sin(0.13 * x) * std::cos(0.09 * y) + 20.0 * std::sin(0.7 * (x + y));
    }
  return img;
}

void BM_BicubicResize(benchmark::State& state) {
  const Image img = test_image(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bicubic_resize(img, 3.0));
}
BENCHMARK(BM_BicubicResize)->Arg(64)->Arg(256);

void BM_KrigingSolve(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<Site> sites;
  for (int i = 0; i < state.range(0); ++i) {
    sites.push_back({20.0 * nn::uniform01(rng), 20.0 * nn::uniform01(rng)});
  }
  const KrigingSystem sys = build_system(sites, {2.0, 3.0});
  const Site target{10.0, 10.0};
  for (auto _ : state) benchmark::DoNotOptimize(solve_weights(sys, target));
}
BENCHMARK(BM_KrigingSolve)->Arg(9)->Arg(25);

void BM_LocalKriging(benchmark::State& state) {
  const Image lr = test_image(30, 30);
  for (auto _ : state) benchmark::DoNotOptimize(local_krige_sr(lr, 3));
}
BENCHMARK(BM_LocalKriging)->Unit(benchmark::kMillisecond);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  nn::Array4<float> x(4, c, 31, 31);
  nn::Array4<float> k(c, c, 3, 3);
  for (float& v : x.storage()) v = static_cast<float>(nn::uniform01(rng));
  for (float& v : k.storage()) v = static_cast<float>(nn::uniform01(rng) - 0.5);
  for (auto _ : state) {
    nn::Graph<float> g;
    const nn::Var in = g.variable(x);
    const nn::Var w = g.variable(k);
    g.backward(nn::mean(g, nn::conv2d(g, in, w, nn::Var{})));
    benchmark::DoNotOptimize(g.grad(w).data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SuperResolve(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.feature_depth = 32;
  cfg.residual_units = 2;
  const auto params = build_network<float>(cfg, 0);
  const Image img = test_image(64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(super_resolve(img, params));
}
BENCHMARK(BM_SuperResolve)->Unit(benchmark::kMillisecond);

void BM_VarianceMap(benchmark::State& state) {
  std::mt19937_64 rng(3);
  WeightField raw(1, 49, 64, 64);
  for (double& v : raw.storage()) v = nn::uniform01(rng);
  const WeightField w = normalize_weights(raw);
  for (auto _ : state) benchmark::DoNotOptimize(variance_map(w, {100.0, 2.0}));
}
BENCHMARK(BM_VarianceMap)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
