#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dkrg/nn/graph.hpp"

namespace dkrg::nn {

struct AdamState {
  std::vector<Array4<float>> m;  // first moments, one per parameter
  std::vector<Array4<float>> v;  // second moments
  std::uint64_t step = 0;
  float learning_rate = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  /// Zeroed moment buffers shaped like `params`.
  static AdamState for_parameters(std::span<const Parameter<float>> params,
                                  float learning_rate = 1e-4f);
};

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamStepResult {
  double grad_norm = 0.0;  // global L2 norm before clipping
  double clip_factor = 1.0;
};

/// One Adam update with bias correction after global-norm gradient clipping
/// (all gradients scaled by clip_norm / norm when norm exceeds clip_norm).
/// Non-trainable parameters are left untouched. Throws NonFiniteGradientError
/// without modifying anything if any gradient is NaN or infinite.
AdamStepResult adam_step(std::span<Parameter<float>> params, AdamState& state,
                         double clip_norm = 1.0);

/// Global L2 norm over the gradients of all trainable parameters.
double global_grad_norm(std::span<const Parameter<float>> params);

}  // namespace dkrg::nn
