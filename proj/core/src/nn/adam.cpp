#include "dkrg/nn/adam.hpp"

#include <cmath>
#include <string>

namespace dkrg::nn {

AdamState AdamState::for_parameters(std::span<const Parameter<float>> params,
                                    float learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const auto& p : params) {
    state.m.emplace_back(p.value.dims());
    state.v.emplace_back(p.value.dims());
  }
  return state;
}

double global_grad_norm(std::span<const Parameter<float>> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.trainable || p.grad.empty()) continue;
    for (float g : p.grad.storage()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

AdamStepResult adam_step(std::span<Parameter<float>> params, AdamState& state,
                         double clip_norm) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  }
  for (const auto& p : params) {
    if (!p.trainable || p.grad.empty()) continue;
    if (!p.grad.same_shape(p.value)) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + p.name);
    }
    for (float g : p.grad.storage()) {
      if (!std::isfinite(g)) {
        throw NonFiniteGradientError("adam_step: non-finite gradient in " + p.name);
      }
    }
  }

  AdamStepResult result;
  result.grad_norm = global_grad_norm(params);
  if (result.grad_norm > clip_norm) result.clip_factor = clip_norm / result.grad_norm;

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(static_cast<double>(state.beta1), t);
  const double correction2 = 1.0 - std::pow(static_cast<double>(state.beta2), t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<float>& p = params[k];
    if (!p.trainable || p.grad.empty()) continue;
    Array4<float>& m = state.m[k];
    Array4<float>& v = state.v[k];
    if (!m.same_shape(p.value) || !v.same_shape(p.value)) {
      throw std::invalid_argument("adam_step: moment shape mismatch for " + p.name);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]) * result.clip_factor;
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      p.value[i] = static_cast<float>(p.value[i] - state.learning_rate * m_hat /
                                                       (std::sqrt(v_hat) + state.epsilon));
    }
  }
  return result;
}

}  // namespace dkrg::nn
