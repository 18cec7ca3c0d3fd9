#include "dkrg/deep_kriging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dkrg/nn/ops.hpp"

namespace dkrg {

namespace {

constexpr double kHeadGain = 1e-3;
constexpr double kNormalizeEps = 1e-8;

// Box-Muller on uniform01 so initial weights do not depend on the standard
// library's normal_distribution.
double standard_normal(std::mt19937_64& rng) {
  double u1 = nn::uniform01(rng);
  while (u1 <= 0.0) u1 = nn::uniform01(rng);
  const double u2 = nn::uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
nn::Parameter<T> he_normal(std::string name, int cout, int cin, int k, double gain,
                           std::mt19937_64& rng) {
  nn::Parameter<T> p{std::move(name), nn::Array4<T>(cout, cin, k, k), {}, true};
  const double stddev = gain * std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  for (T& v : p.value.storage()) v = static_cast<T>(stddev * standard_normal(rng));
  return p;
}

template <typename T>
nn::Parameter<T> filled(std::string name, int channels, T value, bool trainable) {
  return {std::move(name), nn::Array4<T>(channels, 1, 1, 1, value), {}, trainable};
}

template <typename T>
void push_batchnorm(std::vector<nn::Parameter<T>>& out, const std::string& prefix,
                    int channels) {
  out.push_back(filled<T>(prefix + ".scale", channels, T(1), true));
  out.push_back(filled<T>(prefix + ".shift", channels, T(0), true));
  out.push_back(filled<T>(prefix + ".running_mean", channels, T(0), false));
  out.push_back(filled<T>(prefix + ".running_var", channels, T(1), false));
}

std::string unit_prefix(int u) { return "unit" + std::to_string(u); }

template <typename T>
nn::Var bn_relu(nn::Graph<T>& g, NetworkParams<T>& params, const std::string& prefix,
                nn::Var x, nn::Mode mode) {
  nn::BatchNormOptions opts;
  opts.mode = mode;
  const nn::Var gamma = g.parameter(params.at(prefix + ".scale"));
  const nn::Var beta = g.parameter(params.at(prefix + ".shift"));
  const nn::Var y = nn::batchnorm(g, x, gamma, beta, params.at(prefix + ".running_mean").value,
                                  params.at(prefix + ".running_var").value, opts);
  return nn::relu(g, y);
}

template <typename T>
nn::Var conv(nn::Graph<T>& g, NetworkParams<T>& params, const std::string& prefix, nn::Var x) {
  return nn::conv2d(g, x, g.parameter(params.at(prefix + ".weight")),
                    g.parameter(params.at(prefix + ".bias")));
}

double sign_or_one(double s) { return s < 0.0 ? -1.0 : 1.0; }

}  // namespace

void NetworkConfig::validate() const {
  if (radius < 1) throw std::invalid_argument("NetworkConfig: radius must be >= 1");
  if (feature_depth < 1) throw std::invalid_argument("NetworkConfig: feature_depth must be >= 1");
  if (residual_units < 0) {
    throw std::invalid_argument("NetworkConfig: residual_units must be >= 0");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("NetworkConfig: dropout must be in [0, 1)");
  }
}

template <typename T>
nn::Parameter<T>& NetworkParams<T>::at(std::string_view name) {
  for (auto& p : entries) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("NetworkParams: no parameter named " + std::string(name));
}

template <typename T>
const nn::Parameter<T>& NetworkParams<T>::at(std::string_view name) const {
  return const_cast<NetworkParams*>(this)->at(name);
}

template <typename T>
std::size_t NetworkParams<T>::conv_count() const {
  std::size_t count = 0;
  for (const auto& p : entries) {
    if (p.name.ends_with(".weight") && p.value.h() > 1) ++count;
  }
  return count;
}

template <typename T>
void NetworkParams<T>::zero_grad() {
  for (auto& p : entries) {
    if (p.trainable) p.zero_grad();
  }
}

template <typename T>
NetworkParams<T> build_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const int depth = config.feature_depth;
  NetworkParams<T> net;
  net.config = config;
  auto& e = net.entries;

  e.push_back(he_normal<T>("entry.weight", depth, 1, 3, 1.0, rng));
  e.push_back(filled<T>("entry.bias", depth, T(0), true));
  for (int u = 0; u < config.residual_units; ++u) {
    for (int j = 1; j <= 2; ++j) {
      const std::string p = unit_prefix(u);
      push_batchnorm(e, p + ".bn" + std::to_string(j), depth);
      e.push_back(he_normal<T>(p + ".conv" + std::to_string(j) + ".weight", depth, depth, 3, 1.0,
                               rng));
      e.push_back(filled<T>(p + ".conv" + std::to_string(j) + ".bias", depth, T(0), true));
    }
  }
  push_batchnorm(e, "head.bn", depth);
  e.push_back(he_normal<T>("head.weight", config.taps(), depth, 3, kHeadGain, rng));
  auto bias = filled<T>("head.bias", config.taps(), T(0), true);
  bias.value[static_cast<std::size_t>(config.center_tap())] = T(1);
  e.push_back(std::move(bias));
  return net;
}

template <typename T>
nn::Array4<T> repeat_input(const nn::Array4<T>& images, int radius) {
  if (images.c() != 1) throw std::invalid_argument("repeat_input: expected one channel");
  if (radius < 0) throw std::invalid_argument("repeat_input: negative radius");
  const int side = 2 * radius + 1;
  const int h = images.h();
  const int w = images.w();
  nn::Array4<T> out(images.n(), side * side, h, w);
  for (int n = 0; n < images.n(); ++n) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const int k = (dy + radius) * side + (dx + radius);
        for (int y = 0; y < h; ++y) {
          const int sy = std::clamp(y + dy, 0, h - 1);
          for (int x = 0; x < w; ++x) {
            out(n, k, y, x) = images(n, 0, sy, std::clamp(x + dx, 0, w - 1));
          }
        }
      }
    }
  }
  return out;
}

NeighborhoodStack repeat_input(const Image& image, int radius) {
  nn::Array4<double> batch(1, 1, image.height(), image.width());
  std::copy(image.data().begin(), image.data().end(), batch.storage().begin());
  return repeat_input(batch, radius);
}

WeightField normalize_weights(const WeightField& raw) {
  WeightField out(raw.dims());
  const std::size_t plane = raw.plane();
  for (int n = 0; n < raw.n(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double s = 0.0;
      for (int k = 0; k < raw.c(); ++k) s += raw[raw.offset(n, k, 0, 0) + i];
      const double denom = s + kNormalizeEps * sign_or_one(s);
      for (int k = 0; k < raw.c(); ++k) {
        const std::size_t idx = raw.offset(n, k, 0, 0) + i;
        out[idx] = raw[idx] / denom;
      }
    }
  }
  return out;
}

nn::Array4<double> apply_weights(const WeightField& weights, const NeighborhoodStack& stack) {
  if (!weights.same_shape(stack)) {
    throw std::invalid_argument("apply_weights: shape mismatch " + weights.shape_string() +
                                " vs " + stack.shape_string());
  }
  nn::Array4<double> out(weights.n(), 1, weights.h(), weights.w());
  const std::size_t plane = weights.plane();
  for (int n = 0; n < weights.n(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double acc = 0.0;
      for (int k = 0; k < weights.c(); ++k) {
        const std::size_t idx = weights.offset(n, k, 0, 0) + i;
        acc += weights[idx] * stack[idx];
      }
      out[out.offset(n, 0, 0, 0) + i] = acc;
    }
  }
  return out;
}

namespace nn {

template <typename T>
Var normalize_weights(Graph<T>& g, Var raw) {
  const Array4<T>& r = g.value(raw);
  Array4<T> out(r.dims());
  // Per-pixel denominators, kept for the backward pass.
  std::vector<double> denom(static_cast<std::size_t>(r.n()) * r.plane());
  const std::size_t plane = r.plane();
  for (int n = 0; n < r.n(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double s = 0.0;
      for (int k = 0; k < r.c(); ++k) s += r[r.offset(n, k, 0, 0) + i];
      const double d = s + kNormalizeEps * sign_or_one(s);
      denom[static_cast<std::size_t>(n) * plane + i] = d;
      for (int k = 0; k < r.c(); ++k) {
        const std::size_t idx = r.offset(n, k, 0, 0) + i;
        out[idx] = static_cast<T>(r[idx] / d);
      }
    }
  }
  return g.record(std::move(out), {raw},
                  [raw, denom = std::move(denom)](Graph<T>& g, const Array4<T>& dy) {
    // y_k = r_k / d with d = sum_j r_j + const, so
    // dL/dr_j = (dy_j - sum_k dy_k y_k) / d.
    const Array4<T>& r = g.value(raw);
    Array4<T>& dr = g.grad_buffer(raw);
    const std::size_t plane = r.plane();
    for (int n = 0; n < r.n(); ++n) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = denom[static_cast<std::size_t>(n) * plane + i];
        double dot = 0.0;
        for (int k = 0; k < r.c(); ++k) {
          const std::size_t idx = r.offset(n, k, 0, 0) + i;
          dot += static_cast<double>(dy[idx]) * (r[idx] / d);
        }
        for (int k = 0; k < r.c(); ++k) {
          const std::size_t idx = r.offset(n, k, 0, 0) + i;
          dr[idx] += static_cast<T>((dy[idx] - dot) / d);
        }
      }
    }
  });
}

template <typename T>
Var apply_weights(Graph<T>& g, Var weights, Var stack) {
  const Array4<T>& w = g.value(weights);
  const Array4<T>& s = g.value(stack);
  if (!w.same_shape(s)) {
    throw std::invalid_argument("apply_weights: shape mismatch " + w.shape_string() + " vs " +
                                s.shape_string());
  }
  Array4<T> out(w.n(), 1, w.h(), w.w());
  const std::size_t plane = w.plane();
  for (int n = 0; n < w.n(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double acc = 0.0;
      for (int k = 0; k < w.c(); ++k) {
        const std::size_t idx = w.offset(n, k, 0, 0) + i;
        acc += static_cast<double>(w[idx]) * s[idx];
      }
      out[out.offset(n, 0, 0, 0) + i] = static_cast<T>(acc);
    }
  }
  return g.record(std::move(out), {weights, stack},
                  [weights, stack](Graph<T>& g, const Array4<T>& dy) {
    const Array4<T>& w = g.value(weights);
    const Array4<T>& s = g.value(stack);
    Array4<T>* dw = g.requires_grad(weights) ? &g.grad_buffer(weights) : nullptr;
    Array4<T>* ds = g.requires_grad(stack) ? &g.grad_buffer(stack) : nullptr;
    const std::size_t plane = w.plane();
    for (int n = 0; n < w.n(); ++n) {
      for (std::size_t i = 0; i < plane; ++i) {
        const T d = dy[dy.offset(n, 0, 0, 0) + i];
        for (int k = 0; k < w.c(); ++k) {
          const std::size_t idx = w.offset(n, k, 0, 0) + i;
          if (dw != nullptr) (*dw)[idx] += d * s[idx];
          if (ds != nullptr) (*ds)[idx] += d * w[idx];
        }
      }
    }
  });
}

}  // namespace nn

template <typename T>
nn::Var weight_branch(nn::Graph<T>& g, NetworkParams<T>& params, const nn::Array4<T>& lr,
                      nn::Mode mode, std::mt19937_64& rng) {
  if (lr.c() != 1) throw std::invalid_argument("weight_branch: expected one input channel");
  nn::Array4<T> scaled(lr.dims());
  for (std::size_t i = 0; i < lr.size(); ++i) {
    scaled[i] = static_cast<T>(lr[i] * kBranchInputScale);
  }
  nn::Var x = conv(g, params, "entry", g.constant(std::move(scaled)));
  for (int u = 0; u < params.config.residual_units; ++u) {
    const std::string p = unit_prefix(u);
    nn::Var y = bn_relu(g, params, p + ".bn1", x, mode);
    y = conv(g, params, p + ".conv1", y);
    y = bn_relu(g, params, p + ".bn2", y, mode);
    y = conv(g, params, p + ".conv2", y);
    x = nn::add(g, x, y);
  }
  x = bn_relu(g, params, "head.bn", x, mode);
  x = nn::dropout(g, x, params.config.dropout, mode, rng);
  return conv(g, params, "head", x);
}

template <typename T>
nn::Var predict(nn::Graph<T>& g, NetworkParams<T>& params, const nn::Array4<T>& lr,
                nn::Mode mode, std::mt19937_64& rng) {
  const nn::Var raw = weight_branch(g, params, lr, mode, rng);
  const nn::Var w = nn::normalize_weights(g, raw);
  const nn::Var stack = g.constant(repeat_input(lr, params.config.radius));
  return nn::apply_weights(g, w, stack);
}

template <typename T>
nn::Var kriging_loss(nn::Graph<T>& g, NetworkParams<T>& params, const nn::Array4<T>& lr,
                     const nn::Array4<T>& hr, nn::Mode mode, std::mt19937_64& rng) {
  if (!lr.same_shape(hr)) {
    throw std::invalid_argument("kriging_loss: lr " + lr.shape_string() + " vs hr " +
                                hr.shape_string());
  }
  const nn::Var pred = predict(g, params, lr, mode, rng);
  return nn::mse(g, pred, g.constant(hr));
}

SuperResolution super_resolve(const Image& lr_upsampled, const NetworkParams<float>& params) {
  // Eval mode never writes the batch-norm buffers, but the graph API binds
  // parameters by mutable reference.
  NetworkParams<float> local = params;
  nn::Array4<float> batch(1, 1, lr_upsampled.height(), lr_upsampled.width());
  const auto src = lr_upsampled.data();
  for (std::size_t i = 0; i < src.size(); ++i) batch[i] = static_cast<float>(src[i]);

  nn::Graph<float> g;
  std::mt19937_64 rng(0);
  const nn::Var raw = weight_branch(g, local, batch, nn::Mode::kEval, rng);

  SuperResolution result;
  result.weights = normalize_weights(g.value(raw).cast<double>());
  const nn::Array4<double> out =
      apply_weights(result.weights, repeat_input(lr_upsampled, params.config.radius));
  result.sr = Image(lr_upsampled.height(), lr_upsampled.width(),
                    std::vector<double>(out.storage().begin(), out.storage().end()));
  return result;
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;

#define DKRG_INSTANTIATE(T)                                                                    \
  template NetworkParams<T> build_network<T>(const NetworkConfig&, std::uint64_t);            \
  template nn::Array4<T> repeat_input<T>(const nn::Array4<T>&, int);                         \
  template nn::Var nn::normalize_weights<T>(nn::Graph<T>&, nn::Var);                         \
  template nn::Var nn::apply_weights<T>(nn::Graph<T>&, nn::Var, nn::Var);                    \
  template nn::Var weight_branch<T>(nn::Graph<T>&, NetworkParams<T>&, const nn::Array4<T>&,  \
                                    nn::Mode, std::mt19937_64&);                              \
  template nn::Var predict<T>(nn::Graph<T>&, NetworkParams<T>&, const nn::Array4<T>&,        \
                              nn::Mode, std::mt19937_64&);                                    \
  template nn::Var kriging_loss<T>(nn::Graph<T>&, NetworkParams<T>&, const nn::Array4<T>&,   \
                                   const nn::Array4<T>&, nn::Mode, std::mt19937_64&);

DKRG_INSTANTIATE(float)
DKRG_INSTANTIATE(double)

#undef DKRG_INSTANTIATE

}  // namespace dkrg
