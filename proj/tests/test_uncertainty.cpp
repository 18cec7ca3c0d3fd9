#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>

#include "dkrg/nn/ops.hpp"
#include "dkrg/image_io.hpp"
#include "dkrg/uncertainty.hpp"
#include "oracles.hpp"

using namespace dkrg;

namespace {

WeightField random_normalized(int radius, int h, int w, std::mt19937_64& rng) {
  const int taps = (2 * radius + 1) * (2 * radius + 1);
  WeightField field(1, taps, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::vector<double> wk = oracle::unit_sum_weights(taps, rng);
      for (int k = 0; k < taps; ++k) field(0, k, y, x) = wk[static_cast<std::size_t>(k)];
    }
  return field;
}

// Direct enumeration of every (k, k') pair of window offsets.
double pair_oracle(const WeightField& w, int y, int x, int radius, double c0, double sigma) {
  const int side = 2 * radius + 1;
  double v = 0.0;
  for (int k = 0; k < side * side; ++k) {
    for (int j = 0; j < side * side; ++j) {
      const oracle::Point a{double(k / side), double(k % side)};
      const oracle::Point b{double(j / side), double(j % side)};
      v += w(0, k, y, x) * w(0, j, y, x) * oracle::gauss_cov(c0, sigma, a, b);
    }
  }
  return v;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(VarianceMap, OneHotGivesSill) {
  WeightField w(1, 49, 3, 3, 0.0);
  std::mt19937_64 rng(1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) w(0, static_cast<int>(rng() % 49), y, x) = 1.0;
  const VarianceMap v = variance_map(w, {2.75, 1.3});
  for (double d : v.data()) EXPECT_EQ(d, 2.75);
}

TEST(VarianceMap, UniformKernelOnePairOracle) {
  const WeightField w(1, 9, 2, 2, 1.0 / 9.0);
  const VarianceMap v = variance_map(w, {1.0, 1.0});
  EXPECT_NEAR(v(0, 0), pair_oracle(w, 0, 0, 1, 1.0, 1.0), 1e-12);
}

TEST(VarianceMap, RandomFieldsMatchPairOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const WeightField w = random_normalized(3, 4, 5, rng);
    const CovarianceModel m{0.5 + 4.0 * nn::uniform01(rng), 0.5 + 5.0 * nn::uniform01(rng)};
    const VarianceMap v = variance_map(w, m, false);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) {
        const double ref = pair_oracle(w, y, x, 3, m.c0, m.sigma);
        EXPECT_NEAR(v(y, x), ref, 1e-10 * std::abs(ref));
      }
  }
}

TEST(VarianceMap, ConstantKernelLimit) {
  std::mt19937_64 rng(3);
  const WeightField w = random_normalized(3, 3, 3, rng);
  for (double sigma : {1e10, std::numeric_limits<double>::infinity()}) {
    const VarianceMap v = variance_map(w, {3.0, sigma});
    for (double d : v.data()) EXPECT_EQ(d, 3.0);
  }
  // Network-normalized weights sum to one only approximately; the limit is
  // still C0 exactly.
  WeightField raw(1, 49, 2, 2);
  for (double& r : raw.storage()) r = nn::uniform01(rng) - 0.3;
  const VarianceMap n = variance_map(normalize_weights(raw), {3.0, 1e10});
  for (double d : n.data()) EXPECT_EQ(d, 3.0);
}

TEST(VarianceMap, NonNegativeForGaussianKernel) {
  std::mt19937_64 rng(4);
  const WeightField w = random_normalized(3, 6, 6, rng);
  const VarianceMap v = variance_map(w, {1.0, 2.0}, false);
  for (double d : v.data()) EXPECT_GE(d, -1e-9);
}

TEST(VarianceMap, HomogeneousInSill) {
  std::mt19937_64 rng(5);
  const WeightField w = random_normalized(2, 4, 4, rng);
  const VarianceMap a = variance_map(w, {1.5, 2.0}, false);
  const VarianceMap b = variance_map(w, {3.0, 2.0}, false);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b.data()[i], 2.0 * a.data()[i]);
}

TEST(VarianceMap, RejectsUnnormalizedWeights) {
  EXPECT_THROW(variance_map(WeightField(1, 9, 2, 2, 0.5), {1.0, 1.0}), UnnormalizedWeightsError);
  EXPECT_THROW(variance_map(WeightField(1, 8, 2, 2, 0.125), {1.0, 1.0}), std::invalid_argument);
}

TEST(BiasProbe, FixedAndRandomParameters) {
  NetworkConfig cfg;
  cfg.radius = 2;
  cfg.feature_depth = 8;
  cfg.residual_units = 1;
  EXPECT_LT(bias_probe(build_network<float>(cfg, 0), 10, 1), 1e-4);
  EXPECT_LT(bias_probe(cfg, 10, 2), 1e-4);
}

TEST(BiasProbe, ConstantWhiteWithRandomParameters) {
  NetworkConfig cfg;
  cfg.feature_depth = 8;
  cfg.residual_units = 2;
  auto params = build_network<float>(cfg, 77);
  std::mt19937_64 rng(3);
  for (auto& p : params.entries) {
    for (float& v : p.value.storage()) v += static_cast<float>(0.1 * (nn::uniform01(rng) - 0.5));
  }
  const auto res = super_resolve(Image(16, 16, 255.0), params);
  for (double v : res.sr.data()) EXPECT_NEAR(v, 255.0, 1e-4);
}

TEST(Coverage, Extremes) {
  std::mt19937_64 rng(6);
  const Image hr = oracle::random_image(8, 8, rng);
  EXPECT_EQ(coverage_stat(hr, hr, Image(8, 8, 0.0)), 1.0);
  Image sr = hr;
  for (double& v : sr.data()) v += 1.0;
  EXPECT_EQ(coverage_stat(sr, hr, Image(8, 8, 0.0)), 0.0);
  // |error| = 1 is within 3 sd when V >= 1/9.
  EXPECT_EQ(coverage_stat(sr, hr, Image(8, 8, 1.0 / 9.0 + 1e-12)), 1.0);
  EXPECT_EQ(coverage_stat(sr, hr, Image(8, 8, 0.1)), 0.0);
}

TEST(Correlation, ProportionalAndConstant) {
  std::mt19937_64 rng(7);
  const Image hr = oracle::random_image(16, 24, rng);
  Image sr = hr;
  VarianceMap v(16, 24);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 24; ++x) {
      const double e = 1.0 + (y / 8) * 3 + (x / 8);
      sr(y, x) += e;
      v(y, x) = 2.5 * e * e;
    }
  EXPECT_NEAR(error_variance_correlation(sr, hr, v), 1.0, 1e-12);
  EXPECT_EQ(error_variance_correlation(sr, hr, Image(16, 24, 4.0)), 0.0);
}

TEST(Heatmap, ConstantAndBinaryMaps) {
  const auto dir = std::filesystem::temp_directory_path() / "dkrg_test_heat";
  std::filesystem::create_directories(dir);
  render_heatmap(Image(4, 5, 3.0), dir / "c.pgm");
  const ColorImage c = read_image(dir / "c.pgm");
  for (double v : c.data) EXPECT_EQ(v, 128.0);
  const HeatmapRange cr = read_heatmap_sidecar(dir / "c.pgm");
  EXPECT_EQ(cr.min, cr.max);

  Image two(2, 2, 1.0);
  two(1, 1) = 9.0;
  render_heatmap(two, dir / "b.pgm");
  const ColorImage b = read_image(dir / "b.pgm");
  EXPECT_EQ(b.data, (std::vector<double>{0, 0, 0, 255}));
  std::filesystem::remove_all(dir);
}

TEST(Heatmap, RoundTripIsIdempotent) {
  const auto dir = std::filesystem::temp_directory_path() / "dkrg_test_heat2";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(8);
  render_heatmap(oracle::random_image(9, 7, rng, 0.0, 40.0), dir / "a.pgm");

  auto reload = [&](const std::filesystem::path& p) {
    const Image q = read_image(p).channel(0);
    const HeatmapRange r = read_heatmap_sidecar(p);
    Image m(q.height(), q.width());
    for (std::size_t i = 0; i < q.size(); ++i) m.data()[i] = r.min + q.data()[i] / 255.0 * (r.max - r.min);
    return m;
  };
  render_heatmap(reload(dir / "a.pgm"), dir / "b.pgm");
  render_heatmap(reload(dir / "b.pgm"), dir / "c.pgm");
  EXPECT_EQ(file_bytes(dir / "a.pgm"), file_bytes(dir / "b.pgm"));
  EXPECT_EQ(file_bytes(dir / "b.pgm"), file_bytes(dir / "c.pgm"));
  std::filesystem::remove_all(dir);
}
