#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dkrg/nn/graph.hpp"

namespace dkrg::nn {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Builds a scalar from leaf variables bound to the given inputs.
template <typename T>
using ScalarFn = std::function<Var(Graph<T>&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-5;       // central-difference half step
  double tolerance = 1e-6;  // on the relative error
  /// Entries below floor_fraction * max|numeric| of the same input are judged
  /// against that floor instead of their own magnitude.
  double floor_fraction = 1e-2;
  /// Check at most this many entries per input (evenly strided); 0 = all.
  std::size_t max_entries = 0;
};

/// Compares reverse-mode gradients of `fn` with central finite differences
/// for every input. The function is re-evaluated on a fresh Graph per probe,
/// so it must be deterministic (reseed any RNG inside `fn`).
template <typename T>
GradCheckResult check_gradients(const std::string& name, const ScalarFn<T>& fn,
                                std::vector<Array4<T>> inputs,
                                const GradCheckOptions& options = {});

/// sum(v * weights): a scalar probe with a non-trivial upstream gradient.
template <typename T>
Var weighted_sum(Graph<T>& g, Var v, const Array4<T>& weights);

}  // namespace dkrg::nn
