#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dkrg/image.hpp"
#include "dkrg/nn/graph.hpp"

namespace dkrg {

/// Architecture of the weight-generation branch.
struct NetworkConfig {
  int radius = 3;            // K: the filter window is (2K+1) x (2K+1)
  int feature_depth = 128;   // channels of the 19 hidden convolutions
  int residual_units = 9;    // U
  double dropout = 0.3;      // before the prediction convolution

  int taps() const { return (2 * radius + 1) * (2 * radius + 1); }
  int center_tap() const { return 2 * radius * radius + 2 * radius; }
  /// Entry conv + 2 per residual unit + prediction conv.
  int conv_layers() const { return 2 + 2 * residual_units; }

  /// Throws std::invalid_argument if any field is out of range.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Every parameter and buffer of the network in a fixed order.
template <typename T>
struct NetworkParams {
  NetworkConfig config;
  std::vector<nn::Parameter<T>> entries;

  nn::Parameter<T>& at(std::string_view name);
  const nn::Parameter<T>& at(std::string_view name) const;

  std::span<nn::Parameter<T>> all() { return entries; }
  std::span<const nn::Parameter<T>> all() const { return entries; }

  std::size_t conv_count() const;
  void zero_grad();

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.config = config;
    for (const auto& p : entries) {
      out.entries.push_back({p.name, p.value.template cast<U>(), {}, p.trainable});
    }
    return out;
  }
};

/// Conv weights are He-normal (std sqrt(2 / fan_in)) with zero bias. The
/// prediction conv is He-normal scaled by 1e-3 with its bias one-hot on the
/// center tap, so an untrained network starts close to the identity filter.
/// Batch-norm scale/shift start at 1/0, running statistics at 0/1.
/// Deterministic in `seed`.
template <typename T>
NetworkParams<T> build_network(const NetworkConfig& config, std::uint64_t seed);

/// (N, taps, H, W) per-pixel weight vectors.
using WeightField = nn::Array4<double>;
/// (N, taps, H, W); channel k holds the input shifted so that neighbour
/// offset k lines up with the center pixel. Offsets run row-major over
/// (dy, dx) in [-K, K]^2 starting at (-K, -K); out-of-image neighbours
/// replicate the nearest edge pixel.
using NeighborhoodStack = nn::Array4<double>;

template <typename T>
nn::Array4<T> repeat_input(const nn::Array4<T>& images, int radius);
NeighborhoodStack repeat_input(const Image& image, int radius);

/// w_k / (sum_j w_j + 1e-8 * sign(sum_j w_j)), with sign(0) = 1.
WeightField normalize_weights(const WeightField& raw);

/// Per-pixel dot product over the channel dimension: (N, 1, H, W).
nn::Array4<double> apply_weights(const WeightField& weights, const NeighborhoodStack& stack);

namespace nn {

template <typename T>
Var normalize_weights(Graph<T>& g, Var raw);

template <typename T>
Var apply_weights(Graph<T>& g, Var weights, Var stack);

}  // namespace nn

/// Scale applied to intensities before the weight branch.
inline constexpr double kBranchInputScale = 1.0 / 255.0;

/// Raw (unnormalized) weights for an (N, 1, H, W) batch of upsampled LR
/// images in [0, 255].
template <typename T>
nn::Var weight_branch(nn::Graph<T>& g, NetworkParams<T>& params, const nn::Array4<T>& lr,
                      nn::Mode mode, std::mt19937_64& rng);

/// Full estimator on a batch: normalized weights applied to the repeated
/// input. Returns the (N, 1, H, W) prediction.
template <typename T>
nn::Var predict(nn::Graph<T>& g, NetworkParams<T>& params, const nn::Array4<T>& lr,
                nn::Mode mode, std::mt19937_64& rng);

/// Mean squared error of predict() against `hr`.
template <typename T>
nn::Var kriging_loss(nn::Graph<T>& g, NetworkParams<T>& params, const nn::Array4<T>& lr,
                     const nn::Array4<T>& hr, nn::Mode mode, std::mt19937_64& rng);

struct SuperResolution {
  Image sr;
  WeightField weights;  // normalized, (1, taps, H, W)
};

/// Eval-mode inference on one upsampled LR image. The branch runs in single
/// precision; normalization and weighting run in double.
SuperResolution super_resolve(const Image& lr_upsampled, const NetworkParams<float>& params);

}  // namespace dkrg
