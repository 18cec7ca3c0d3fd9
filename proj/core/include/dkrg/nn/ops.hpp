#pragma once

#include <cstdint>
#include <random>

#include "dkrg/nn/graph.hpp"

namespace dkrg::nn {

/// Same-size convolution: odd square kernel (Cout, Cin, k, k), zero padding of
/// k/2, stride 1. `bias` (Cout, 1, 1, 1) may be an invalid Var.
template <typename T>
Var conv2d(Graph<T>& g, Var input, Var kernel, Var bias);

struct BatchNormOptions {
  Mode mode = Mode::kTrain;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};

/// Per-channel normalization over (batch, height, width). Train mode uses
/// batch statistics and updates the running buffers (allocating them from the
/// first batch if empty); eval mode uses the running buffers and throws
/// std::logic_error if they were never set.
template <typename T>
Var batchnorm(Graph<T>& g, Var input, Var scale, Var shift, Array4<T>& running_mean,
              Array4<T>& running_var, const BatchNormOptions& options);

template <typename T>
Var relu(Graph<T>& g, Var input);

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1 / (1 - rate). Eval mode is identity.
template <typename T>
Var dropout(Graph<T>& g, Var input, double rate, Mode mode, std::mt19937_64& rng);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var mul(Graph<T>& g, Var a, Var b);

template <typename T>
Var scale(Graph<T>& g, Var a, double factor);

/// Sum of all elements, as a (1, 1, 1, 1) array.
template <typename T>
Var sum(Graph<T>& g, Var a);

template <typename T>
Var mean(Graph<T>& g, Var a);

/// Mean squared error between two same-shaped arrays.
template <typename T>
Var mse(Graph<T>& g, Var prediction, Var target);

/// Uniform double in [0, 1) from 53 random bits; stable across standard
/// library implementations.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace dkrg::nn
