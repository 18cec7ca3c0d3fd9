#include "dkrg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "dkrg/deep_kriging.hpp"
#include "dkrg/nn/ops.hpp"
#include "dkrg/training.hpp"

namespace dkrg {

namespace {

using nn::Array4;
using nn::Graph;
using nn::Var;

constexpr double kOpTolerance = 1e-6;
constexpr double kNetworkTolerance = 1e-3;
constexpr double kNetworkStep = 1e-6;

Array4<double> uniform(std::mt19937_64& rng, std::array<int, 4> dims, double lo, double hi) {
  Array4<double> a(dims);
  for (double& v : a.storage()) v = lo + (hi - lo) * nn::uniform01(rng);
  return a;
}

// Values in [lo, hi] with a random sign, so no entry sits near zero.
Array4<double> away_from_zero(std::mt19937_64& rng, std::array<int, 4> dims, double lo,
                              double hi) {
  Array4<double> a = uniform(rng, dims, lo, hi);
  for (double& v : a.storage()) {
    if (nn::uniform01(rng) < 0.5) v = -v;
  }
  return a;
}

nn::GradCheckResult run(const std::string& name, const nn::ScalarFn<double>& fn,
                        std::vector<Array4<double>> inputs) {
  nn::GradCheckOptions opts;
  opts.tolerance = kOpTolerance;
  return nn::check_gradients<double>(name, fn, std::move(inputs), opts);
}

template <typename T>
double network_loss(NetworkParams<T>& params, const Array4<T>& lr, const Array4<T>& hr,
                    std::uint64_t dropout_seed, bool backward) {
  Graph<T> g;
  std::mt19937_64 rng(dropout_seed);
  const Var pred = predict(g, params, lr, nn::Mode::kTrain, rng);
  const Array4<T>& p = g.value(pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(hr[i]);
    acc += d * d;
  }
  if (backward) g.backward(nn::mse(g, pred, g.constant(hr)));
  return acc / static_cast<double>(p.size());
}

}  // namespace

nn::GradCheckResult check_network_gradients(std::uint64_t seed) {
  NetworkConfig cfg;
  cfg.radius = 1;
  cfg.feature_depth = 8;
  cfg.residual_units = 2;
  NetworkParams<float> params = build_network<float>(cfg, seed);

  std::mt19937_64 rng(seed + 17);
  Array4<float> lr(2, 1, 8, 8);
  Array4<float> hr(2, 1, 8, 8);
  for (std::size_t i = 0; i < lr.size(); ++i) {
    lr[i] = static_cast<float>(255.0 * nn::uniform01(rng));
    hr[i] = static_cast<float>(lr[i] + 40.0 * (nn::uniform01(rng) - 0.5));
  }
  const std::uint64_t dropout_seed = seed + 29;

  // Analytic gradients come from the single-precision engine. A float loss
  // is too coarse to difference at this accuracy, so the finite differences
  // are taken on the same network and data promoted to double.
  params.zero_grad();
  network_loss(params, lr, hr, dropout_seed, true);
  NetworkParams<double> wide = params.cast<double>();
  const Array4<double> lr_wide = lr.cast<double>();
  const Array4<double> hr_wide = hr.cast<double>();

  std::vector<std::vector<double>> numeric(params.entries.size());
  double global_scale = 0.0;
  for (std::size_t k = 0; k < params.entries.size(); ++k) {
    if (!params.entries[k].trainable) continue;
    Array4<double>& value = wide.entries[k].value;
    numeric[k].resize(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double original = value[i];
      const double h = kNetworkStep * std::max(1.0, std::abs(original));
      value[i] = original + h;
      const double f_plus = network_loss(wide, lr_wide, hr_wide, dropout_seed, false);
      value[i] = original - h;
      const double f_minus = network_loss(wide, lr_wide, hr_wide, dropout_seed, false);
      value[i] = original;
      numeric[k][i] = (f_plus - f_minus) / (2.0 * h);
      global_scale = std::max(global_scale, std::abs(numeric[k][i]));
    }
  }

  nn::GradCheckResult result;
  result.name = "network_loss_f32";
  result.tolerance = kNetworkTolerance;
  for (std::size_t k = 0; k < params.entries.size(); ++k) {
    const auto& p = params.entries[k];
    if (!p.trainable) continue;
    double scale = 0.0;
    for (double v : numeric[k]) scale = std::max(scale, std::abs(v));
    // Biases feeding batch norm have an exactly zero gradient; the global
    // term keeps their round-off from being judged against nothing.
    const double floor = std::max({1e-2 * scale, 1e-6 * global_scale, 1e-12});
    for (std::size_t i = 0; i < numeric[k].size(); ++i) {
      const double a = p.grad[i];
      const double n = numeric[k][i];
      const double diff = std::abs(a - n);
      result.max_abs_error = std::max(result.max_abs_error, diff);
      result.max_rel_error =
          std::max(result.max_rel_error, diff / std::max({std::abs(a), std::abs(n), floor}));
      ++result.checked;
    }
  }
  result.passed = result.max_rel_error < kNetworkTolerance;
  return result;
}

std::vector<nn::GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<nn::GradCheckResult> results;

  {
    const Array4<double> probe = uniform(rng, {2, 4, 5, 6}, -1, 1);
    results.push_back(run(
        "conv2d_3x3",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::conv2d(g, v[0], v[1], v[2]), probe);
        },
        {uniform(rng, {2, 3, 5, 6}, -1, 1), uniform(rng, {4, 3, 3, 3}, -1, 1),
         uniform(rng, {4, 1, 1, 1}, -1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {1, 3, 6, 5}, -1, 1);
    results.push_back(run(
        "conv2d_5x5_nobias",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::conv2d(g, v[0], v[1], Var{}), probe);
        },
        {uniform(rng, {1, 2, 6, 5}, -1, 1), uniform(rng, {3, 2, 5, 5}, -1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {2, 2, 4, 4}, -1, 1);
    results.push_back(run(
        "conv2d_1x1",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::conv2d(g, v[0], v[1], v[2]), probe);
        },
        {uniform(rng, {2, 3, 4, 4}, -1, 1), uniform(rng, {2, 3, 1, 1}, -1, 1),
         uniform(rng, {2, 1, 1, 1}, -1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {3, 2, 4, 5}, -1, 1);
    results.push_back(run(
        "batchnorm_train",
        [probe](Graph<double>& g, std::span<const Var> v) {
          Array4<double> mean;
          Array4<double> var;
          nn::BatchNormOptions opts;
          opts.mode = nn::Mode::kTrain;
          return nn::weighted_sum(g, nn::batchnorm(g, v[0], v[1], v[2], mean, var, opts), probe);
        },
        {uniform(rng, {3, 2, 4, 5}, -2, 3), uniform(rng, {2, 1, 1, 1}, 0.5, 1.5),
         uniform(rng, {2, 1, 1, 1}, -1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {2, 3, 3, 3}, -1, 1);
    const Array4<double> running_mean = uniform(rng, {3, 1, 1, 1}, -1, 1);
    const Array4<double> running_var = uniform(rng, {3, 1, 1, 1}, 0.5, 2);
    results.push_back(run(
        "batchnorm_eval",
        [probe, running_mean, running_var](Graph<double>& g, std::span<const Var> v) {
          Array4<double> mean = running_mean;
          Array4<double> var = running_var;
          nn::BatchNormOptions opts;
          opts.mode = nn::Mode::kEval;
          return nn::weighted_sum(g, nn::batchnorm(g, v[0], v[1], v[2], mean, var, opts), probe);
        },
        {uniform(rng, {2, 3, 3, 3}, -2, 2), uniform(rng, {3, 1, 1, 1}, 0.5, 1.5),
         uniform(rng, {3, 1, 1, 1}, -1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {2, 2, 3, 4}, -1, 1);
    results.push_back(run(
        "relu",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::relu(g, v[0]), probe);
        },
        {away_from_zero(rng, {2, 2, 3, 4}, 0.1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {2, 3, 4, 4}, -1, 1);
    const std::uint64_t mask_seed = rng();
    results.push_back(run(
        "dropout_train",
        [probe, mask_seed](Graph<double>& g, std::span<const Var> v) {
          std::mt19937_64 mask_rng(mask_seed);
          return nn::weighted_sum(g, nn::dropout(g, v[0], 0.3, nn::Mode::kTrain, mask_rng),
                                  probe);
        },
        {uniform(rng, {2, 3, 4, 4}, -1, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {1, 2, 3, 3}, -1, 1);
    results.push_back(run(
        "add",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::add(g, v[0], v[1]), probe);
        },
        {uniform(rng, {1, 2, 3, 3}, -1, 1), uniform(rng, {1, 2, 3, 3}, -1, 1)}));
    results.push_back(run(
        "mul",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::mul(g, v[0], v[1]), probe);
        },
        {uniform(rng, {1, 2, 3, 3}, -1, 1), uniform(rng, {1, 2, 3, 3}, -1, 1)}));
    results.push_back(run(
        "scale",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::scale(g, v[0], -1.7), probe);
        },
        {uniform(rng, {1, 2, 3, 3}, -1, 1)}));
  }
  results.push_back(run(
      "sum", [](Graph<double>& g, std::span<const Var> v) { return nn::sum(g, v[0]); },
      {uniform(rng, {2, 1, 3, 2}, -1, 1)}));
  results.push_back(run(
      "mean", [](Graph<double>& g, std::span<const Var> v) { return nn::mean(g, v[0]); },
      {uniform(rng, {2, 1, 3, 2}, -1, 1)}));
  results.push_back(run(
      "mse", [](Graph<double>& g, std::span<const Var> v) { return nn::mse(g, v[0], v[1]); },
      {uniform(rng, {2, 1, 4, 3}, -1, 1), uniform(rng, {2, 1, 4, 3}, -1, 1)}));
  {
    const Array4<double> probe = uniform(rng, {2, 9, 3, 4}, -1, 1);
    results.push_back(run(
        "normalize_weights",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::normalize_weights(g, v[0]), probe);
        },
        {uniform(rng, {2, 9, 3, 4}, -0.3, 1)}));
  }
  {
    const Array4<double> probe = uniform(rng, {2, 1, 3, 4}, -1, 1);
    results.push_back(run(
        "apply_weights",
        [probe](Graph<double>& g, std::span<const Var> v) {
          return nn::weighted_sum(g, nn::apply_weights(g, v[0], v[1]), probe);
        },
        {uniform(rng, {2, 9, 3, 4}, -1, 1), uniform(rng, {2, 9, 3, 4}, -1, 1)}));
  }

  results.push_back(check_network_gradients(seed));
  return results;
}

void print_gradcheck_report(std::ostream& out, const std::vector<nn::GradCheckResult>& results) {
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-22s checked=%-6zu max_rel_err=%.3e tol=%.0e %s\n",
                  r.name.c_str(), r.checked, r.max_rel_error, r.tolerance,
                  r.passed ? "PASS" : "FAIL");
    out << buf;
  }
}

}  // namespace dkrg
