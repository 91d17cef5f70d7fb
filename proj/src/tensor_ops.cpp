#include "demcloud/tensor_ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace demcloud::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

int out_extent(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Column buffer of (C*K*K) rows by (Ho*Wo) columns for one sample.
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* cols) {
  const std::size_t ncol = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    const T* xc = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ncol;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T{});
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T{};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
                T* dx) {
  const std::size_t ncol = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    T* xc = dx + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ncol;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_shapes(const Tensor4<T>& x, const Tensor4<T>& weight, int stride, int pad) {
  if (weight.c() != x.c()) {
    throw InvariantError("conv2d: input has " + std::to_string(x.c()) +
                         " channels, weights expect " + std::to_string(weight.c()));
  }
  if (weight.h() != weight.w()) throw InvariantError("conv2d: kernel must be square");
  if (stride < 1 || pad < 0) throw InvariantError("conv2d: invalid stride or padding");
  if (out_extent(x.h(), weight.h(), stride, pad) <= 0 ||
      out_extent(x.w(), weight.w(), stride, pad) <= 0) {
    throw InvariantError("conv2d: output dimensions are not positive for input " +
                         x.shape_string());
  }
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                          std::span<const T> bias, int stride, int pad) {
  check_conv_shapes(x, weight, stride, pad);
  const int cout = weight.n();
  if (bias.size() != static_cast<std::size_t>(cout)) {
    throw InvariantError("conv2d: bias size does not match output channels");
  }
  const int k = weight.h();
  const int ho = out_extent(x.h(), k, stride, pad);
  const int wo = out_extent(x.w(), k, stride, pad);
  const int kdim = x.c() * k * k;
  const int ncol = ho * wo;

  Tensor4<T> y(x.n(), cout, ho, wo);
  std::vector<T> cols(static_cast<std::size_t>(kdim) * ncol);
  ConstMapMat<T> wmat(weight.data(), cout, kdim);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), x.c(), x.h(), x.w(), k, stride, pad, ho, wo, cols.data());
    MapMat<T> ymat(y.sample(n), cout, ncol);
    ymat.noalias() = wmat * ConstMapMat<T>(cols.data(), kdim, ncol);
    for (int co = 0; co < cout; ++co) ymat.row(co).array() += bias[co];
  }
  return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                             const Tensor4<T>& dy, int stride, int pad) {
  check_conv_shapes(x, weight, stride, pad);
  const int cout = weight.n();
  const int k = weight.h();
  const int ho = out_extent(x.h(), k, stride, pad);
  const int wo = out_extent(x.w(), k, stride, pad);
  if (dy.n() != x.n() || dy.c() != cout || dy.h() != ho || dy.w() != wo) {
    throw InvariantError("conv2d_backward: gradient shape " + dy.shape_string() +
                         " does not match output");
  }
  const int kdim = x.c() * k * k;
  const int ncol = ho * wo;

  ConvGrads<T> g{Tensor4<T>(x.n(), x.c(), x.h(), x.w()),
                 Tensor4<T>(cout, x.c(), k, k), std::vector<T>(cout, T{})};
  std::vector<T> cols(static_cast<std::size_t>(kdim) * ncol);
  std::vector<T> dcols(cols.size());
  ConstMapMat<T> wmat(weight.data(), cout, kdim);
  MapMat<T> dwmat(g.dw.data(), cout, kdim);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), x.c(), x.h(), x.w(), k, stride, pad, ho, wo, cols.data());
    ConstMapMat<T> dymat(dy.sample(n), cout, ncol);
    dwmat.noalias() += dymat * ConstMapMat<T>(cols.data(), kdim, ncol).transpose();
    MapMat<T>(dcols.data(), kdim, ncol).noalias() = wmat.transpose() * dymat;
    col2im_add(dcols.data(), x.c(), x.h(), x.w(), k, stride, pad, ho, wo, g.dx.sample(n));
    for (int co = 0; co < cout; ++co) {
      double s = 0;
      const T* row = dy.sample(n) + static_cast<std::size_t>(co) * ncol;
      for (int i = 0; i < ncol; ++i) s += row[i];
      g.db[co] += static_cast<T>(s);
    }
  }
  return g;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y = x;
  for (auto& v : y.values()) v = v > T{} ? v : T{};
  return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& y, const Tensor4<T>& dy) {
  if (!y.same_dims(dy)) throw InvariantError("relu_backward: shape mismatch");
  Tensor4<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(y[i] > T{})) dx[i] = T{};
  }
  return dx;
}

template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) {
    throw InvariantError("maxpool: odd spatial dimensions " + x.shape_string());
  }
  const int ho = x.h() / 2;
  const int wo = x.w() / 2;
  PoolResult<T> r{Tensor4<T>(x.n(), x.c(), ho, wo), {}};
  r.argmax.resize(r.y.size());
  std::size_t out = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * x.c() + c) * x.plane();
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++out) {
          std::size_t best = base + static_cast<std::size_t>(2 * oy) * x.w() + 2 * ox;
          T best_v = x[best];
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx =
                  base + static_cast<std::size_t>(2 * oy + dy) * x.w() + 2 * ox + dx;
              if (x[idx] > best_v) {
                best_v = x[idx];
                best = idx;
              }
            }
          }
          r.y[out] = best_v;
          r.argmax[out] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax,
                            const std::array<int, 4>& input_dims) {
  if (argmax.size() != dy.size()) throw InvariantError("maxpool_backward: shape mismatch");
  Tensor4<T> dx(input_dims[0], input_dims[1], input_dims[2], input_dims[3]);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

template <typename T>
Tensor4<T> upconv_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                          std::span<const T> bias) {
  if (weight.n() != x.c() || weight.h() != 2 || weight.w() != 2) {
    throw InvariantError("upconv: weight shape " + weight.shape_string() +
                         " does not match input " + x.shape_string());
  }
  const int cin = x.c();
  const int cout = weight.c();
  if (bias.size() != static_cast<std::size_t>(cout)) {
    throw InvariantError("upconv: bias size does not match output channels");
  }
  const int h = x.h();
  const int w = x.w();
  const int hw = h * w;
  Tensor4<T> y(x.n(), cout, 2 * h, 2 * w);
  RowMat<T> expanded(cout * 4, hw);
  ConstMapMat<T> wmat(weight.data(), cin, cout * 4);
  for (int n = 0; n < x.n(); ++n) {
    expanded.noalias() = wmat.transpose() * ConstMapMat<T>(x.sample(n), cin, hw);
    for (int co = 0; co < cout; ++co) {
      for (int k = 0; k < 4; ++k) {
        const int ky = k / 2;
        const int kx = k % 2;
        const T* src = expanded.data() + static_cast<std::size_t>(co * 4 + k) * hw;
        for (int iy = 0; iy < h; ++iy) {
          for (int ix = 0; ix < w; ++ix) {
            y(n, co, 2 * iy + ky, 2 * ix + kx) = src[iy * w + ix] + bias[co];
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
ConvGrads<T> upconv_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                             const Tensor4<T>& dy) {
  const int cin = x.c();
  const int cout = weight.c();
  const int h = x.h();
  const int w = x.w();
  const int hw = h * w;
  if (dy.n() != x.n() || dy.c() != cout || dy.h() != 2 * h || dy.w() != 2 * w) {
    throw InvariantError("upconv_backward: gradient shape mismatch");
  }
  ConvGrads<T> g{Tensor4<T>(x.n(), cin, h, w), Tensor4<T>(cin, cout, 2, 2),
                 std::vector<T>(cout, T{})};
  RowMat<T> gathered(cout * 4, hw);
  ConstMapMat<T> wmat(weight.data(), cin, cout * 4);
  MapMat<T> dwmat(g.dw.data(), cin, cout * 4);
  for (int n = 0; n < x.n(); ++n) {
    for (int co = 0; co < cout; ++co) {
      double s = 0;
      for (int k = 0; k < 4; ++k) {
        const int ky = k / 2;
        const int kx = k % 2;
        T* dst = gathered.data() + static_cast<std::size_t>(co * 4 + k) * hw;
        for (int iy = 0; iy < h; ++iy) {
          for (int ix = 0; ix < w; ++ix) {
            const T v = dy(n, co, 2 * iy + ky, 2 * ix + kx);
            dst[iy * w + ix] = v;
            s += v;
          }
        }
      }
      g.db[co] += static_cast<T>(s);
    }
    ConstMapMat<T> xmat(x.sample(n), cin, hw);
    MapMat<T>(g.dx.sample(n), cin, hw).noalias() = wmat * gathered;
    dwmat.noalias() += xmat * gathered.transpose();
  }
  return g;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw InvariantError("concat: shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
  Tensor4<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sample_size(), out.sample(n) + a.sample_size());
  }
  return out;
}

template <typename T>
void split_channels(const Tensor4<T>& d, int channels_a, Tensor4<T>& da, Tensor4<T>& db) {
  da = Tensor4<T>(d.n(), channels_a, d.h(), d.w());
  db = Tensor4<T>(d.n(), d.c() - channels_a, d.h(), d.w());
  for (int n = 0; n < d.n(); ++n) {
    std::copy(d.sample(n), d.sample(n) + da.sample_size(), da.sample(n));
    std::copy(d.sample(n) + da.sample_size(), d.sample(n) + d.sample_size(), db.sample(n));
  }
}

template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& logits) {
  Tensor4<T> p(logits.n(), logits.c(), logits.h(), logits.w());
  const std::size_t plane = logits.plane();
  const int c = logits.c();
  for (int n = 0; n < logits.n(); ++n) {
    const T* z = logits.sample(n);
    T* out = p.sample(n);
    for (std::size_t i = 0; i < plane; ++i) {
      double zmax = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < c; ++k) zmax = std::max(zmax, static_cast<double>(z[k * plane + i]));
      double sum = 0;
      for (int k = 0; k < c; ++k) sum += std::exp(static_cast<double>(z[k * plane + i]) - zmax);
      for (int k = 0; k < c; ++k) {
        out[k * plane + i] =
            static_cast<T>(std::exp(static_cast<double>(z[k * plane + i]) - zmax) / sum);
      }
    }
  }
  return p;
}

template <typename T>
LossResult<T> weighted_ce_loss(const Tensor4<T>& probs, std::span<const std::uint8_t> targets,
                               std::span<const double> class_weights) {
  const std::size_t plane = probs.plane();
  const int c = probs.c();
  if (targets.size() != static_cast<std::size_t>(probs.n()) * plane) {
    throw InvariantError("weighted_ce_loss: target count does not match predictions");
  }
  if (class_weights.size() != static_cast<std::size_t>(c)) {
    throw InvariantError("weighted_ce_loss: one weight per class required");
  }
  constexpr double kFloor = 1e-12;
  const double inv_count = 1.0 / static_cast<double>(targets.size());
  LossResult<T> r{0.0, Tensor4<T>(probs.n(), c, probs.h(), probs.w()), 0};
  double total = 0;
  for (int n = 0; n < probs.n(); ++n) {
    const T* p = probs.sample(n);
    T* d = r.dlogits.sample(n);
    for (std::size_t i = 0; i < plane; ++i) {
      const int y = targets[n * plane + i];
      if (y >= c) throw InvariantError("weighted_ce_loss: target label out of range");
      const double wy = class_weights[y];
      double py = static_cast<double>(p[y * plane + i]);
      if (py < kFloor) {
        py = kFloor;
        ++r.clamped;
      }
      total -= wy * std::log(py);
      for (int k = 0; k < c; ++k) {
        const double pk = static_cast<double>(p[k * plane + i]);
        d[k * plane + i] = static_cast<T>(wy * inv_count * (pk - (k == y ? 1.0 : 0.0)));
      }
    }
  }
  r.loss = total * inv_count;
  return r;
}

#define DEMCLOUD_INSTANTIATE(T)                                                              \
  template Tensor4<T> conv2d_forward(const Tensor4<T>&, const Tensor4<T>&, std::span<const T>, \
                                     int, int);                                              \
  template ConvGrads<T> conv2d_backward(const Tensor4<T>&, const Tensor4<T>&,                \
                                        const Tensor4<T>&, int, int);                        \
  template Tensor4<T> relu_forward(const Tensor4<T>&);                                       \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                   \
  template PoolResult<T> maxpool_forward(const Tensor4<T>&);                                 \
  template Tensor4<T> maxpool_backward(const Tensor4<T>&, const std::vector<std::uint32_t>&, \
                                       const std::array<int, 4>&);                           \
  template Tensor4<T> upconv_forward(const Tensor4<T>&, const Tensor4<T>&, std::span<const T>); \
  template ConvGrads<T> upconv_backward(const Tensor4<T>&, const Tensor4<T>&,                \
                                        const Tensor4<T>&);                                  \
  template Tensor4<T> concat_channels(const Tensor4<T>&, const Tensor4<T>&);                 \
  template void split_channels(const Tensor4<T>&, int, Tensor4<T>&, Tensor4<T>&);            \
  template Tensor4<T> softmax_channels(const Tensor4<T>&);                                   \
  template LossResult<T> weighted_ce_loss(const Tensor4<T>&, std::span<const std::uint8_t>,  \
                                          std::span<const double>);

DEMCLOUD_INSTANTIATE(float)
DEMCLOUD_INSTANTIATE(double)

#undef DEMCLOUD_INSTANTIATE

}  // namespace demcloud::nn
