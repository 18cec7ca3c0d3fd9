#include "dkrg/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "dkrg/parallel.hpp"

namespace dkrg::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;

// (channels*k*k, h*w) patch matrix of one image with zero padding k/2.
template <typename T>
void im2col(const T* img, int channels, int h, int w, int k, T* col) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* plane = img + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - pad;
          T* row = dst + static_cast<std::size_t>(y) * w;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          for (int x = 0; x < w; ++x) {
            const int ix = x + kx - pad;
            row[x] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, T* img) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* plane = img + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          const int x0 = std::max(0, pad - kx);
          const int x1 = std::min(w, w + pad - kx);
          for (int x = x0; x < x1; ++x) dst[x + kx - pad] += row[x];
        }
      }
    }
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var input, Var kernel, Var bias) {
  const Array4<T>& x = g.value(input);
  const Array4<T>& wt = g.value(kernel);
  require(wt.h() == wt.w() && wt.h() % 2 == 1, "conv2d: kernel must be odd and square");
  require(wt.c() == x.c(), "conv2d: input channels do not match kernel");
  if (bias.valid()) {
    require(g.value(bias).size() == static_cast<std::size_t>(wt.n()),
            "conv2d: bias size does not match output channels");
  }
  const int batch = x.n();
  const int cin = x.c();
  const int cout = wt.n();
  const int h = x.h();
  const int w = x.w();
  const int k = wt.h();
  const Eigen::Index patch = static_cast<Eigen::Index>(cin) * k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;

  Array4<T> out(batch, cout, h, w);
  const ConstRowMap<T> wmat(wt.data(), cout, patch);
  const T* bias_data = bias.valid() ? g.value(bias).data() : nullptr;
  parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b) {
    RowMat<T> col(patch, hw);
    im2col(x.data() + b * cin * hw, cin, h, w, k, col.data());
    RowMap<T> ob(out.data() + b * cout * hw, cout, hw);
    ob.noalias() = wmat * col;
    if (bias_data != nullptr) {
      for (int o = 0; o < cout; ++o) ob.row(o).array() += bias_data[o];
    }
  });

  return g.record(std::move(out), {input, kernel, bias},
                  [input, kernel, bias](Graph<T>& g, const Array4<T>& gout) {
    const Array4<T>& x = g.value(input);
    const Array4<T>& wt = g.value(kernel);
    const int batch = x.n();
    const int cin = x.c();
    const int cout = wt.n();
    const int h = x.h();
    const int w = x.w();
    const int k = wt.h();
    const Eigen::Index patch = static_cast<Eigen::Index>(cin) * k * k;
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    const bool need_x = g.requires_grad(input);
    const bool need_w = g.requires_grad(kernel);
    const bool need_b = bias.valid() && g.requires_grad(bias);

    T* dx = need_x ? g.grad_buffer(input).data() : nullptr;
    std::vector<RowMat<T>> dw_items(need_w ? static_cast<std::size_t>(batch) : 0);
    const ConstRowMap<T> wmat(wt.data(), cout, patch);

    parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b) {
      const ConstRowMap<T> gb(gout.data() + b * cout * hw, cout, hw);
      if (need_w) {
        RowMat<T> col(patch, hw);
        im2col(x.data() + b * cin * hw, cin, h, w, k, col.data());
        dw_items[b].noalias() = gb * col.transpose();
      }
      if (need_x) {
        RowMat<T> dcol(patch, hw);
        dcol.noalias() = wmat.transpose() * gb;
        col2im_add(dcol.data(), cin, h, w, k, dx + b * cin * hw);
      }
    });

    if (need_w) {
      RowMap<T> dw(g.grad_buffer(kernel).data(), cout, patch);
      for (const auto& item : dw_items) dw += item;
    }
    if (need_b) {
      Array4<T>& db = g.grad_buffer(bias);
      for (int b = 0; b < batch; ++b) {
        const ConstRowMap<T> gb(gout.data() + b * cout * hw, cout, hw);
        for (int o = 0; o < cout; ++o) db[static_cast<std::size_t>(o)] += gb.row(o).sum();
      }
    }
  });
}

template <typename T>
Var batchnorm(Graph<T>& g, Var input, Var scale, Var shift, Array4<T>& running_mean,
              Array4<T>& running_var, const BatchNormOptions& options) {
  const Array4<T>& x = g.value(input);
  const Array4<T>& gamma = g.value(scale);
  const Array4<T>& beta = g.value(shift);
  const int batch = x.n();
  const int channels = x.c();
  const std::size_t hw = x.plane();
  require(gamma.size() == static_cast<std::size_t>(channels) &&
              beta.size() == static_cast<std::size_t>(channels),
          "batchnorm: scale/shift size does not match channels");
  const double count = static_cast<double>(batch) * static_cast<double>(hw);

  std::vector<double> mean(static_cast<std::size_t>(channels));
  std::vector<double> inv_std(static_cast<std::size_t>(channels));
  if (options.mode == Mode::kTrain) {
    require(count > 0, "batchnorm: empty input");
    const bool first = running_mean.empty() || running_var.empty();
    if (first) {
      running_mean = Array4<T>(channels, 1, 1, 1);
      running_var = Array4<T>(channels, 1, 1, 1);
    }
    for (int c = 0; c < channels; ++c) {
      double s = 0.0;
      for (int b = 0; b < batch; ++b) {
        const T* p = x.data() + x.offset(b, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / count;
      double v = 0.0;
      for (int b = 0; b < batch; ++b) {
        const T* p = x.data() + x.offset(b, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = p[i] - mu;
          v += d * d;
        }
      }
      const double var = v / count;
      mean[static_cast<std::size_t>(c)] = mu;
      inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + options.eps);
      const double unbiased = count > 1 ? v / (count - 1) : var;
      const auto uc = static_cast<std::size_t>(c);
      if (first) {
        running_mean[uc] = static_cast<T>(mu);
        running_var[uc] = static_cast<T>(unbiased);
      } else {
        running_mean[uc] = static_cast<T>(options.momentum * running_mean[uc] +
                                          (1.0 - options.momentum) * mu);
        running_var[uc] = static_cast<T>(options.momentum * running_var[uc] +
                                         (1.0 - options.momentum) * unbiased);
      }
    }
  } else {
    if (running_mean.empty() || running_var.empty()) {
      throw std::logic_error("batchnorm: eval mode before running statistics were set");
    }
    require(running_mean.size() == static_cast<std::size_t>(channels),
            "batchnorm: running statistics size mismatch");
    for (int c = 0; c < channels; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      mean[uc] = running_mean[uc];
      inv_std[uc] = 1.0 / std::sqrt(static_cast<double>(running_var[uc]) + options.eps);
    }
  }

  Array4<T> xhat(x.dims());
  Array4<T> out(x.dims());
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      const std::size_t base = x.offset(b, c, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (x[base + i] - mean[uc]) * inv_std[uc];
        xhat[base + i] = static_cast<T>(xh);
        out[base + i] = static_cast<T>(gamma[uc] * xh + beta[uc]);
      }
    }
  }

  const bool train = options.mode == Mode::kTrain;
  return g.record(std::move(out), {input, scale, shift},
                  [input, scale, shift, xhat = std::move(xhat), inv_std, train, count](
                      Graph<T>& g, const Array4<T>& gout) {
    const Array4<T>& gamma = g.value(scale);
    const int batch = gout.n();
    const int channels = gout.c();
    const std::size_t hw = gout.plane();
    const bool need_x = g.requires_grad(input);
    Array4<T>* dscale = g.requires_grad(scale) ? &g.grad_buffer(scale) : nullptr;
    Array4<T>* dshift = g.requires_grad(shift) ? &g.grad_buffer(shift) : nullptr;
    Array4<T>* dx = need_x ? &g.grad_buffer(input) : nullptr;
    for (int c = 0; c < channels; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (int b = 0; b < batch; ++b) {
        const std::size_t base = gout.offset(b, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += gout[base + i];
          sum_dy_xhat += static_cast<double>(gout[base + i]) * xhat[base + i];
        }
      }
      if (dscale != nullptr) (*dscale)[uc] += static_cast<T>(sum_dy_xhat);
      if (dshift != nullptr) (*dshift)[uc] += static_cast<T>(sum_dy);
      if (dx == nullptr) continue;
      const double k = gamma[uc] * inv_std[uc];
      for (int b = 0; b < batch; ++b) {
        const std::size_t base = gout.offset(b, c, 0, 0);
        for (std::size_t i = 0; i < hw; ++i) {
          double d = gout[base + i];
          if (train) d -= (sum_dy + xhat[base + i] * sum_dy_xhat) / count;
          (*dx)[base + i] += static_cast<T>(k * d);
        }
      }
    }
  });
}

template <typename T>
Var relu(Graph<T>& g, Var input) {
  Array4<T> out = g.value(input);
  for (T& v : out.storage()) v = v > T(0) ? v : T(0);
  return g.record(std::move(out), {input}, [input](Graph<T>& g, const Array4<T>& gout) {
    const Array4<T>& x = g.value(input);
    Array4<T>& dx = g.grad_buffer(input);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > T(0)) dx[i] += gout[i];
    }
  });
}

template <typename T>
Var dropout(Graph<T>& g, Var input, double rate, Mode mode, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (mode == Mode::kEval || rate == 0.0) {
    return g.record(g.value(input), {input}, [input](Graph<T>& g, const Array4<T>& gout) {
      Array4<T>& dx = g.grad_buffer(input);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gout[i];
    });
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Array4<T> mask(g.value(input).dims());
  for (T& m : mask.storage()) m = uniform01(rng) < rate ? T(0) : keep_scale;
  Array4<T> out = g.value(input);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return g.record(std::move(out), {input},
                  [input, mask = std::move(mask)](Graph<T>& g, const Array4<T>& gout) {
    Array4<T>& dx = g.grad_buffer(input);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gout[i] * mask[i];
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  require(g.value(a).same_shape(g.value(b)), "add: shape mismatch");
  Array4<T> out = g.value(a);
  const Array4<T>& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Array4<T>& gout) {
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Array4<T>& d = g.grad_buffer(v);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i];
    }
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  require(g.value(a).same_shape(g.value(b)), "mul: shape mismatch");
  Array4<T> out = g.value(a);
  const Array4<T>& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Array4<T>& gout) {
    if (g.requires_grad(a)) {
      const Array4<T>& bv = g.value(b);
      Array4<T>& d = g.grad_buffer(a);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      const Array4<T>& av = g.value(a);
      Array4<T>& d = g.grad_buffer(b);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i] * av[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, double factor) {
  Array4<T> out = g.value(a);
  for (T& v : out.storage()) v = static_cast<T>(v * factor);
  return g.record(std::move(out), {a}, [a, factor](Graph<T>& g, const Array4<T>& gout) {
    Array4<T>& d = g.grad_buffer(a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += static_cast<T>(gout[i] * factor);
  });
}

template <typename T>
Var sum(Graph<T>& g, Var a) {
  double acc = 0.0;
  for (T v : g.value(a).storage()) acc += v;
  return g.record(Array4<T>(1, 1, 1, 1, static_cast<T>(acc)), {a},
                  [a](Graph<T>& g, const Array4<T>& gout) {
    Array4<T>& d = g.grad_buffer(a);
    for (T& v : d.storage()) v += gout[0];
  });
}

template <typename T>
Var mean(Graph<T>& g, Var a) {
  const double n = static_cast<double>(g.value(a).size());
  require(n > 0, "mean: empty input");
  return scale(g, sum(g, a), 1.0 / n);
}

template <typename T>
Var mse(Graph<T>& g, Var prediction, Var target) {
  const Array4<T>& p = g.value(prediction);
  const Array4<T>& t = g.value(target);
  require(p.same_shape(t), "mse: shape mismatch");
  require(!p.empty(), "mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const double n = static_cast<double>(p.size());
  return g.record(Array4<T>(1, 1, 1, 1, static_cast<T>(acc / n)), {prediction, target},
                  [prediction, target, n](Graph<T>& g, const Array4<T>& gout) {
    const Array4<T>& p = g.value(prediction);
    const Array4<T>& t = g.value(target);
    const double k = 2.0 * gout[0] / n;
    if (g.requires_grad(prediction)) {
      Array4<T>& d = g.grad_buffer(prediction);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += static_cast<T>(k * (p[i] - t[i]));
    }
    if (g.requires_grad(target)) {
      Array4<T>& d = g.grad_buffer(target);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= static_cast<T>(k * (p[i] - t[i]));
    }
  });
}

#define DKRG_INSTANTIATE_OPS(T)                                                          \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var);                                      \
  template Var batchnorm<T>(Graph<T>&, Var, Var, Var, Array4<T>&, Array4<T>&,            \
                            const BatchNormOptions&);                                    \
  template Var relu<T>(Graph<T>&, Var);                                                  \
  template Var dropout<T>(Graph<T>&, Var, double, Mode, std::mt19937_64&);               \
  template Var add<T>(Graph<T>&, Var, Var);                                              \
  template Var mul<T>(Graph<T>&, Var, Var);                                              \
  template Var scale<T>(Graph<T>&, Var, double);                                         \
  template Var sum<T>(Graph<T>&, Var);                                                   \
  template Var mean<T>(Graph<T>&, Var);                                                  \
  template Var mse<T>(Graph<T>&, Var, Var);

DKRG_INSTANTIATE_OPS(float)
DKRG_INSTANTIATE_OPS(double)

#undef DKRG_INSTANTIATE_OPS

}  // namespace dkrg::nn
