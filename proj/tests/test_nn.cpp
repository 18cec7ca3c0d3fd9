#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dkrg/nn/adam.hpp"
#include "dkrg/nn/gradcheck.hpp"
#include "dkrg/nn/ops.hpp"

using namespace dkrg::nn;

namespace {

template <typename T>
Array4<T> random_array(int n, int c, int h, int w, std::mt19937_64& rng, double lo = -1.0,
                       double hi = 1.0) {
  Array4<T> a(n, c, h, w);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<T>(lo + (hi - lo) * uniform01(rng));
  return a;
}

// Direct nested-loop convolution with zero padding k/2.
Array4<double> naive_conv(const Array4<double>& in, const Array4<double>& k,
                          const Array4<double>* bias) {
  const int pad = k.h() / 2;
  Array4<double> out(in.n(), k.n(), in.h(), in.w());
  for (int n = 0; n < in.n(); ++n)
    for (int o = 0; o < k.n(); ++o)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
          for (int c = 0; c < in.c(); ++c)
            for (int ky = 0; ky < k.h(); ++ky)
              for (int kx = 0; kx < k.w(); ++kx) {
                const int iy = y + ky - pad;
                const int ix = x + kx - pad;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += in(n, c, iy, ix) * k(o, c, ky, kx);
              }
          out(n, o, y, x) = acc;
        }
  return out;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const auto input = random_array<double>(1, 1, 6, 7, rng);
  Array4<double> k(1, 1, 3, 3);
  k(0, 0, 1, 1) = 1.0;
  Graph<double> g;
  const Var out = conv2d(g, g.constant(input), g.constant(k), g.constant(Array4<double>(1, 1, 1, 1)));
  EXPECT_EQ(g.value(out), input);
}

TEST(Conv2d, OnesKernelOnConstantInterior) {
  Graph<float> g;
  const Var out = conv2d(g, g.constant(Array4<float>(1, 1, 5, 5, 2.0f)),
                         g.constant(Array4<float>(1, 1, 3, 3, 1.0f)), Var{});
  EXPECT_FLOAT_EQ(g.value(out)(0, 0, 2, 2), 18.0f);
  EXPECT_FLOAT_EQ(g.value(out)(0, 0, 0, 0), 8.0f);
}

TEST(Conv2d, MatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  const auto input = random_array<double>(2, 3, 5, 5, rng);
  const auto kernel = random_array<double>(4, 3, 3, 3, rng);
  const auto bias = random_array<double>(1, 4, 1, 1, rng);
  Graph<double> g;
  const Var out = conv2d(g, g.constant(input), g.constant(kernel), g.constant(bias));
  const auto ref = naive_conv(input, kernel, &bias);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(g.value(out)[i], ref[i], 1e-5 * std::max(1.0, std::abs(ref[i])));
  }
}

TEST(Conv2d, FloatMatchesNaiveOracle) {
  std::mt19937_64 rng(3);
  const auto input = random_array<double>(2, 3, 5, 5, rng);
  const auto kernel = random_array<double>(2, 3, 5, 5, rng);
  Graph<float> g;
  const Var out = conv2d(g, g.constant(input.cast<float>()), g.constant(kernel.cast<float>()), Var{});
  const auto ref = naive_conv(input, kernel, nullptr);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(g.value(out)[i], ref[i], 1e-5 * std::max(1.0, std::abs(ref[i])));
  }
}

TEST(Conv2d, ShapeMismatchThrows) {
  Graph<double> g;
  EXPECT_THROW(conv2d(g, g.constant(Array4<double>(1, 2, 4, 4)),
                      g.constant(Array4<double>(1, 3, 3, 3)), Var{}),
               std::invalid_argument);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(4);
  Graph<double> g;
  const Var in = g.variable(random_array<double>(1, 2, 4, 4, rng));
  const Var k = g.variable(random_array<double>(3, 2, 3, 3, rng));
  const Var b = g.variable(Array4<double>(1, 3, 1, 1));
  const Var out = conv2d(g, in, k, b);
  const Var s = weighted_sum(g, out, Array4<double>(1, 3, 4, 4, 0.0));
  g.backward(s);
  for (Var v : {in, k, b}) {
    for (double d : g.grad(v).span()) EXPECT_EQ(d, 0.0);
  }
}

TEST(Conv2dBackward, SinglePixelUpstreamSelectsInputPatch) {
  std::mt19937_64 rng(5);
  const auto input = random_array<double>(1, 2, 5, 6, rng);
  Graph<double> g;
  const Var in = g.constant(input);
  const Var k = g.variable(random_array<double>(2, 2, 3, 3, rng));
  const Var out = conv2d(g, in, k, Var{});
  Array4<double> mask(1, 2, 5, 6);
  mask(0, 1, 2, 3) = 1.0;
  g.backward(weighted_sum(g, out, mask));
  const auto& gk = g.grad(k);
  for (int c = 0; c < 2; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        EXPECT_DOUBLE_EQ(gk(1, c, ky, kx), input(0, c, 2 + ky - 1, 3 + kx - 1));
        EXPECT_EQ(gk(0, c, ky, kx), 0.0);
      }
}

TEST(Conv2dBackward, FiniteDifferences) {
  std::mt19937_64 rng(6);
  const auto weights = random_array<double>(2, 3, 4, 5, rng);
  ScalarFn<double> fn = [&](Graph<double>& g, std::span<const Var> v) {
    return weighted_sum(g, conv2d(g, v[0], v[1], v[2]), weights);
  };
  GradCheckOptions opts;
  opts.step = 1e-3;
  const auto r = check_gradients<double>(
      "conv", fn,
      {random_array<double>(2, 2, 4, 5, rng), random_array<double>(3, 2, 3, 3, rng),
       random_array<double>(1, 3, 1, 1, rng)},
      opts);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(BatchNorm, StandardizedInputPassesThrough) {
  Array4<double> x(4, 1, 1, 2);
  const double vals[8] = {-1.5, -1, -0.5, 0, 0, 0.5, 1, 1.5};
  for (int i = 0; i < 8; ++i) x[static_cast<std::size_t>(i)] = vals[i];
  // Population variance 1 - eps, so var + eps is exactly one.
  double var = 0.0;
  for (double v : vals) var += v * v / 8.0;
  for (std::size_t i = 0; i < 8; ++i) x[i] *= std::sqrt((1.0 - 1e-5) / var);
  Graph<double> g;
  Array4<double> rm, rv;
  const Var y = batchnorm(g, g.constant(x), g.constant(Array4<double>(1, 1, 1, 1, 1.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 0.0)), rm, rv, {});
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(g.value(y)[i], x[i], 1e-9);
}

TEST(BatchNorm, ConstantChannelGivesShift) {
  Graph<double> g;
  Array4<double> rm, rv;
  const Var y = batchnorm(g, g.constant(Array4<double>(2, 1, 3, 3, 7.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 2.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 0.25)), rm, rv, {});
  for (double v : g.value(y).span()) EXPECT_NEAR(v, 0.25, 1e-12);
  // Empty buffers are seeded from the first batch.
  EXPECT_EQ(rm[0], 7.0);
  EXPECT_EQ(rv[0], 0.0);

  const Var z = batchnorm(g, g.constant(Array4<double>(2, 1, 3, 3, 17.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 2.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 0.25)), rm, rv, {});
  (void)z;
  EXPECT_NEAR(rm[0], 0.9 * 7.0 + 0.1 * 17.0, 1e-12);
}

TEST(BatchNorm, EvalWithoutRunningStatsThrows) {
  Graph<double> g;
  Array4<double> rm, rv;
  BatchNormOptions eval;
  eval.mode = Mode::kEval;
  EXPECT_THROW(batchnorm(g, g.constant(Array4<double>(1, 1, 2, 2)),
                         g.constant(Array4<double>(1, 1, 1, 1, 1.0)),
                         g.constant(Array4<double>(1, 1, 1, 1)), rm, rv, eval),
               std::logic_error);
}

TEST(BatchNorm, EvalUsesRunningStats) {
  Graph<double> g;
  Array4<double> rm(1, 1, 1, 1, 2.0), rv(1, 1, 1, 1, 4.0);
  BatchNormOptions eval;
  eval.mode = Mode::kEval;
  const Var y = batchnorm(g, g.constant(Array4<double>(1, 1, 1, 1, 6.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 1.0)),
                          g.constant(Array4<double>(1, 1, 1, 1, 0.0)), rm, rv, eval);
  EXPECT_NEAR(g.value(y)[0], 4.0 / std::sqrt(4.0 + 1e-5), 1e-12);
}

TEST(BatchNorm, FiniteDifferences) {
  std::mt19937_64 rng(7);
  const auto weights = random_array<double>(3, 2, 3, 3, rng);
  ScalarFn<double> fn = [&](Graph<double>& g, std::span<const Var> v) {
    Array4<double> rm, rv;
    return weighted_sum(g, batchnorm(g, v[0], v[1], v[2], rm, rv, {}), weights);
  };
  const auto r = check_gradients<double>(
      "batchnorm", fn,
      {random_array<double>(3, 2, 3, 3, rng), random_array<double>(1, 2, 1, 1, rng, 0.5, 1.5),
       random_array<double>(1, 2, 1, 1, rng)});
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(Relu, Values) {
  Array4<double> x(1, 1, 1, 2);
  x[0] = -1.0;
  x[1] = 2.0;
  Graph<double> g;
  const Var y = relu(g, g.constant(x));
  EXPECT_EQ(g.value(y)[0], 0.0);
  EXPECT_EQ(g.value(y)[1], 2.0);
}

TEST(Dropout, EvalIsIdentity) {
  std::mt19937_64 rng(8);
  const auto x = random_array<float>(2, 3, 4, 4, rng);
  Graph<float> g;
  EXPECT_EQ(g.value(dropout(g, g.constant(x), 0.3, Mode::kEval, rng)), x);
}

TEST(Dropout, DropFractionMonteCarlo) {
  std::mt19937_64 rng(9);
  Graph<float> g;
  const Var y = dropout(g, g.constant(Array4<float>(1, 1, 1000, 1000, 1.0f)), 0.3, Mode::kTrain, rng);
  std::size_t zeros = 0;
  for (float v : g.value(y).span()) {
    if (v == 0.0f) {
      ++zeros;
    } else {
      EXPECT_NEAR(v, 1.0f / 0.7f, 1e-6f);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e6, 0.3, 0.002);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<Parameter<float>> params(1);
  params[0].value = Array4<float>(1, 1, 2, 2, 3.0f);
  params[0].zero_grad();
  auto state = AdamState::for_parameters(params);
  adam_step(params, state);
  EXPECT_EQ(params[0].value, Array4<float>(1, 1, 2, 2, 3.0f));
}

TEST(Adam, FirstStepIsMinusLearningRate) {
  std::vector<Parameter<float>> params(1);
  params[0].value = Array4<float>(1, 1, 1, 1, 0.5f);
  params[0].zero_grad();
  params[0].grad[0] = 1.0f;
  auto state = AdamState::for_parameters(params, 1e-4f);
  adam_step(params, state);
  // m_hat = 1, v_hat = 1, step = lr * 1 / (1 + eps)
  EXPECT_EQ(params[0].value[0], static_cast<float>(0.5 - 1e-4 / (1.0 + 1e-8)));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, GlobalNormClipping) {
  std::vector<Parameter<float>> params(2);
  params[0].value = Array4<float>(1, 1, 1, 1);
  params[1].value = Array4<float>(1, 1, 1, 1);
  params[0].zero_grad();
  params[1].zero_grad();
  params[0].grad[0] = 6.0f;
  params[1].grad[0] = 8.0f;
  auto state = AdamState::for_parameters(params);
  const AdamStepResult r = adam_step(params, state, 1.0);
  EXPECT_NEAR(r.grad_norm, 10.0, 1e-6);
  EXPECT_NEAR(r.clip_factor, 0.1, 1e-7);
  // m = (1 - beta1) * clipped gradient
  EXPECT_NEAR(state.m[0][0], 0.1 * 0.6, 1e-6);
  EXPECT_NEAR(state.m[1][0], 0.1 * 0.8, 1e-6);
}

TEST(Adam, NonFiniteGradientRejectedWithoutChanges) {
  std::vector<Parameter<float>> params(1);
  params[0].value = Array4<float>(1, 1, 1, 2, 1.0f);
  params[0].zero_grad();
  params[0].grad[1] = std::nanf("");
  auto state = AdamState::for_parameters(params);
  EXPECT_THROW(adam_step(params, state), NonFiniteGradientError);
  EXPECT_EQ(params[0].value, Array4<float>(1, 1, 1, 2, 1.0f));
  EXPECT_EQ(state.step, 0u);
}

TEST(Adam, NonTrainableUntouched) {
  std::vector<Parameter<float>> params(1);
  params[0].value = Array4<float>(1, 1, 1, 1, 2.0f);
  params[0].trainable = false;
  params[0].zero_grad();
  params[0].grad[0] = 1.0f;
  auto state = AdamState::for_parameters(params);
  adam_step(params, state);
  EXPECT_EQ(params[0].value[0], 2.0f);
}
