#include "dkrg/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dkrg/nn/ops.hpp"

namespace dkrg::nn {

template <typename T>
Var weighted_sum(Graph<T>& g, Var v, const Array4<T>& weights) {
  return sum(g, mul(g, v, g.constant(weights)));
}

template <typename T>
GradCheckResult check_gradients(const std::string& name, const ScalarFn<T>& fn,
                                std::vector<Array4<T>> inputs,
                                const GradCheckOptions& options) {
  auto evaluate = [&](const std::vector<Array4<T>>& values, bool with_grad,
                      std::vector<Array4<T>>* grads) {
    Graph<T> g;
    std::vector<Var> leaves;
    leaves.reserve(values.size());
    for (const auto& v : values) leaves.push_back(g.variable(v));
    const Var out = fn(g, leaves);
    const double value = static_cast<double>(g.value(out)[0]);
    if (with_grad) {
      g.backward(out);
      grads->clear();
      for (Var leaf : leaves) grads->push_back(g.grad(leaf));
    }
    return value;
  };

  std::vector<Array4<T>> analytic;
  evaluate(inputs, true, &analytic);

  GradCheckResult result;
  result.name = name;
  result.tolerance = options.tolerance;

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t n = inputs[k].size();
    const std::size_t stride =
        options.max_entries == 0 || n <= options.max_entries ? 1 : n / options.max_entries;
    std::vector<std::size_t> probe;
    for (std::size_t i = 0; i < n; i += stride) probe.push_back(i);

    std::vector<double> numeric(probe.size());
    for (std::size_t p = 0; p < probe.size(); ++p) {
      const std::size_t i = probe[p];
      const T original = inputs[k][i];
      const double h = options.step * std::max(1.0, std::abs(static_cast<double>(original)));
      inputs[k][i] = static_cast<T>(original + h);
      const double plus_h = static_cast<double>(inputs[k][i]) - original;
      const double f_plus = evaluate(inputs, false, nullptr);
      inputs[k][i] = static_cast<T>(original - h);
      const double minus_h = original - static_cast<double>(inputs[k][i]);
      const double f_minus = evaluate(inputs, false, nullptr);
      inputs[k][i] = original;
      numeric[p] = (f_plus - f_minus) / (plus_h + minus_h);
    }

    double scale = 0.0;
    for (double v : numeric) scale = std::max(scale, std::abs(v));
    const double floor = std::max(options.floor_fraction * scale, 1e-12);
    for (std::size_t p = 0; p < probe.size(); ++p) {
      const double a = analytic[k][probe[p]];
      const double diff = std::abs(a - numeric[p]);
      const double denom = std::max({std::abs(a), std::abs(numeric[p]), floor});
      result.max_abs_error = std::max(result.max_abs_error, diff);
      result.max_rel_error = std::max(result.max_rel_error, diff / denom);
      ++result.checked;
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

template Var weighted_sum<float>(Graph<float>&, Var, const Array4<float>&);
template Var weighted_sum<double>(Graph<double>&, Var, const Array4<double>&);
template GradCheckResult check_gradients<float>(const std::string&, const ScalarFn<float>&,
                                                std::vector<Array4<float>>,
                                                const GradCheckOptions&);
template GradCheckResult check_gradients<double>(const std::string&, const ScalarFn<double>&,
                                                 std::vector<Array4<double>>,
                                                 const GradCheckOptions&);

}  // namespace dkrg::nn
