#pragma once

// Forward and backward kernels for the two fixed model graphs.
//
// Conventions:
//   - activations are NHWC, dense weights are [in, out]
//   - conv2d weights are [kh, kw, cin, cout]; depthwise weights are [kh, kw, c]
//   - backward functions *accumulate* into parameter gradients and return
//     the input gradient
//   - "same" padding follows the TensorFlow rule: out = ceil(in / stride),
//     with the odd padding pixel on the bottom/right

#include <Eigen/Core>

#include <cstdint>
#include <limits>

#include "vidscan/nn/tensor.hpp"

namespace vidscan::nn {

struct ConvGeometry {
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  int kh = 0, kw = 0;
  int stride = 1;
  int pad_top = 0, pad_left = 0;
};

inline ConvGeometry conv_geometry(int in_h, int in_w, int kh, int kw, int stride, bool same_padding) {
  if (stride < 1) throw ShapeError("stride must be >= 1");
  ConvGeometry g{in_h, in_w, 0, 0, kh, kw, stride, 0, 0};
  if (same_padding) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const int pad_h = std::max((g.out_h - 1) * stride + kh - in_h, 0);
    const int pad_w = std::max((g.out_w - 1) * stride + kw - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (in_h < kh || in_w < kw) throw ShapeError("valid convolution with kernel larger than input");
    g.out_h = (in_h - kh) / stride + 1;
    g.out_w = (in_w - kw) / stride + 1;
  }
  return g;
}

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

inline void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Full convolution (used for the 3x3 stems).

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride, bool same_padding) {
  detail::require(x.rank() == 4 && w.rank() == 4, "conv2d: expects NHWC input and [kh,kw,cin,cout] weight");
  detail::require(x.dim(3) == w.dim(2), "conv2d: channel mismatch");
  const int n = x.dim(0), cin = x.dim(3), cout = w.dim(3);
  const auto g = conv_geometry(x.dim(1), x.dim(2), w.dim(0), w.dim(1), stride, same_padding);
  BasicTensor<T> y({n, g.out_h, g.out_w, cout});
  const T* xp = x.data();
  const T* wp = w.data();
  T* yp = y.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        T* yrow = yp + ((static_cast<std::size_t>(b) * g.out_h + oy) * g.out_w + ox) * cout;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const T* xrow = xp + ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + ix) * cin;
            const T* wk = wp + (static_cast<std::size_t>(ky) * g.kw + kx) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
              const T xv = xrow[ci];
              const T* wrow = wk + static_cast<std::size_t>(ci) * cout;
              for (int co = 0; co < cout; ++co) yrow[co] += xv * wrow[co];
            }
          }
        }
      }
    }
  }
  return y;
}

// Weight gradient only; for first layers whose input needs no gradient.
template <class T>
void conv2d_backward_weights(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride, bool same_padding,
                             const BasicTensor<T>& dy, BasicTensor<T>& dw) {
  const int n = x.dim(0), cin = x.dim(3), cout = w.dim(3);
  const auto g = conv_geometry(x.dim(1), x.dim(2), w.dim(0), w.dim(1), stride, same_padding);
  detail::require(dy.shape() == Shape({n, g.out_h, g.out_w, cout}), "conv2d_backward: dy shape");
  detail::require(dw.shape() == w.shape(), "conv2d_backward: dw shape");
  const T* xp = x.data();
  const T* dyp = dy.data();
  T* dwp = dw.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const T* grow = dyp + ((static_cast<std::size_t>(b) * g.out_h + oy) * g.out_w + ox) * cout;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const T* xrow = xp + ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + ix) * cin;
            T* dwk = dwp + (static_cast<std::size_t>(ky) * g.kw + kx) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
              const T xv = xrow[ci];
              T* dwrow = dwk + static_cast<std::size_t>(ci) * cout;
              for (int co = 0; co < cout; ++co) dwrow[co] += xv * grow[co];
            }
          }
        }
      }
    }
  }
}

template <class T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride, bool same_padding,
                               const BasicTensor<T>& dy, BasicTensor<T>& dw) {
  const int n = x.dim(0), cin = x.dim(3), cout = w.dim(3);
  const auto g = conv_geometry(x.dim(1), x.dim(2), w.dim(0), w.dim(1), stride, same_padding);
  detail::require(dy.shape() == Shape({n, g.out_h, g.out_w, cout}), "conv2d_backward: dy shape");
  detail::require(dw.shape() == w.shape(), "conv2d_backward: dw shape");
  BasicTensor<T> dx(x.shape());
  const T* xp = x.data();
  const T* wp = w.data();
  const T* dyp = dy.data();
  T* dxp = dx.data();
  T* dwp = dw.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const T* grow = dyp + ((static_cast<std::size_t>(b) * g.out_h + oy) * g.out_w + ox) * cout;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const std::size_t xoff = ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + ix) * cin;
            const std::size_t woff = (static_cast<std::size_t>(ky) * g.kw + kx) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
              const T xv = xp[xoff + ci];
              const T* wrow = wp + woff + static_cast<std::size_t>(ci) * cout;
              T* dwrow = dwp + woff + static_cast<std::size_t>(ci) * cout;
              T acc = 0;
              for (int co = 0; co < cout; ++co) {
                acc += grow[co] * wrow[co];
                dwrow[co] += xv * grow[co];
              }
              dxp[xoff + ci] += acc;
            }
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Depthwise convolution.

template <class T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride, bool same_padding) {
  detail::require(x.rank() == 4 && w.rank() == 3, "depthwise_conv2d: expects NHWC input and [kh,kw,c] weight");
  detail::require(x.dim(3) == w.dim(2), "depthwise_conv2d: channel mismatch");
  const int n = x.dim(0), c = x.dim(3);
  const auto g = conv_geometry(x.dim(1), x.dim(2), w.dim(0), w.dim(1), stride, same_padding);
  BasicTensor<T> y({n, g.out_h, g.out_w, c});
  const T* xp = x.data();
  const T* wp = w.data();
  T* yp = y.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        T* yrow = yp + ((static_cast<std::size_t>(b) * g.out_h + oy) * g.out_w + ox) * c;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const T* xrow = xp + ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + ix) * c;
            const T* wrow = wp + (static_cast<std::size_t>(ky) * g.kw + kx) * c;
            for (int ch = 0; ch < c; ++ch) yrow[ch] += xrow[ch] * wrow[ch];
          }
        }
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> depthwise_conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride,
                                         bool same_padding, const BasicTensor<T>& dy, BasicTensor<T>& dw) {
  const int n = x.dim(0), c = x.dim(3);
  const auto g = conv_geometry(x.dim(1), x.dim(2), w.dim(0), w.dim(1), stride, same_padding);
  detail::require(dy.shape() == Shape({n, g.out_h, g.out_w, c}), "depthwise_conv2d_backward: dy shape");
  detail::require(dw.shape() == w.shape(), "depthwise_conv2d_backward: dw shape");
  BasicTensor<T> dx(x.shape());
  const T* xp = x.data();
  const T* wp = w.data();
  const T* dyp = dy.data();
  T* dxp = dx.data();
  T* dwp = dw.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const T* grow = dyp + ((static_cast<std::size_t>(b) * g.out_h + oy) * g.out_w + ox) * c;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const std::size_t xoff = ((static_cast<std::size_t>(b) * g.in_h + iy) * g.in_w + ix) * c;
            const std::size_t woff = (static_cast<std::size_t>(ky) * g.kw + kx) * c;
            const T* xrow = xp + xoff;
            T* dxrow = dxp + xoff;
            const T* wrow = wp + woff;
            T* dwrow = dwp + woff;
            for (int ch = 0; ch < c; ++ch) {
              dxrow[ch] += grow[ch] * wrow[ch];
              dwrow[ch] += grow[ch] * xrow[ch];
            }
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pointwise (1x1) convolution: a matrix multiply over the channel axis.

template <class T>
BasicTensor<T> pointwise_conv(const BasicTensor<T>& x, const BasicTensor<T>& w) {
  detail::require(w.rank() == 2 && x.rank() >= 2, "pointwise_conv: expects [..., cin] input and [cin,cout] weight");
  const int cin = x.dim(-1), cout = w.dim(1);
  detail::require(cin == w.dim(0), "pointwise_conv: channel mismatch");
  const auto rows = static_cast<Eigen::Index>(x.size() / static_cast<std::size_t>(cin));
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  BasicTensor<T> y(out_shape);
  detail::MapMat<T>(y.data(), rows, cout).noalias() =
      detail::CMapMat<T>(x.data(), rows, cin) * detail::CMapMat<T>(w.data(), cin, cout);
  return y;
}

template <class T>
BasicTensor<T> pointwise_conv_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& dy,
                                       BasicTensor<T>& dw) {
  const int cin = x.dim(-1), cout = w.dim(1);
  const auto rows = static_cast<Eigen::Index>(x.size() / static_cast<std::size_t>(cin));
  detail::require(dy.size() == static_cast<std::size_t>(rows) * cout, "pointwise_conv_backward: dy shape");
  detail::require(dw.shape() == w.shape(), "pointwise_conv_backward: dw shape");
  BasicTensor<T> dx(x.shape());
  const auto X = detail::CMapMat<T>(x.data(), rows, cin);
  const auto G = detail::CMapMat<T>(dy.data(), rows, cout);
  detail::MapMat<T>(dw.data(), cin, cout).noalias() += X.transpose() * G;
  detail::MapMat<T>(dx.data(), rows, cin).noalias() = G * detail::CMapMat<T>(w.data(), cin, cout).transpose();
  return dx;
}

// Fully connected layer: pointwise conv plus a bias row.
template <class T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  detail::require(b.rank() == 1 && b.dim(0) == w.dim(1), "dense: bias length");
  BasicTensor<T> y = pointwise_conv(x, w);
  const int cout = w.dim(1);
  T* yp = y.data();
  for (std::size_t r = 0; r < y.size(); r += static_cast<std::size_t>(cout))
    for (int c = 0; c < cout; ++c) yp[r + c] += b[c];
  return y;
}

template <class T>
BasicTensor<T> dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& dy,
                              BasicTensor<T>& dw, BasicTensor<T>& db) {
  const int cout = w.dim(1);
  const T* g = dy.data();
  for (std::size_t r = 0; r < dy.size(); r += static_cast<std::size_t>(cout))
    for (int c = 0; c < cout; ++c) db[c] += g[r + c];
  return pointwise_conv_backward(x, w, dy, dw);
}

// ---------------------------------------------------------------------------
// Per-channel affine (stands in for batch normalization), optionally fused
// with ReLU6.

template <class T>
BasicTensor<T> channel_affine(const BasicTensor<T>& x, const BasicTensor<T>& scale, const BasicTensor<T>& bias,
                              bool relu6 = false) {
  const int c = x.dim(-1);
  detail::require(scale.size() == static_cast<std::size_t>(c) && bias.size() == static_cast<std::size_t>(c),
                  "channel_affine: scale/bias length must equal channel count");
  BasicTensor<T> y(x.shape());
  const T* xp = x.data();
  const T* s = scale.data();
  const T* bp = bias.data();
  T* yp = y.data();
  for (std::size_t r = 0; r < x.size(); r += static_cast<std::size_t>(c)) {
    for (int ch = 0; ch < c; ++ch) {
      T v = xp[r + ch] * s[ch] + bp[ch];
      if (relu6) v = std::min(std::max(v, T(0)), T(6));
      yp[r + ch] = v;
    }
  }
  return y;
}

// `y` is the forward output; it is only consulted when relu6 is set.
template <class T>
BasicTensor<T> channel_affine_backward(const BasicTensor<T>& x, const BasicTensor<T>& scale, const BasicTensor<T>& y,
                                       bool relu6, const BasicTensor<T>& dy, BasicTensor<T>& dscale,
                                       BasicTensor<T>& dbias) {
  const int c = x.dim(-1);
  detail::require(dy.shape() == x.shape(), "channel_affine_backward: dy shape");
  BasicTensor<T> dx(x.shape());
  const T* xp = x.data();
  const T* yp = relu6 ? y.data() : nullptr;
  const T* g = dy.data();
  const T* s = scale.data();
  T* dxp = dx.data();
  T* ds = dscale.data();
  T* dbp = dbias.data();
  for (std::size_t r = 0; r < x.size(); r += static_cast<std::size_t>(c)) {
    for (int ch = 0; ch < c; ++ch) {
      T gv = g[r + ch];
      if (yp != nullptr) {
        const T yv = yp[r + ch];
        gv = (yv > T(0) && yv < T(6)) ? gv : T(0);
      }
      dxp[r + ch] = gv * s[ch];
      ds[ch] += gv * xp[r + ch];
      dbp[ch] += gv;
    }
  }
  return dx;
}

template <class T>
BasicTensor<T> relu6(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(std::max(x[i], T(0)), T(6));
  return y;
}

template <class T>
BasicTensor<T> relu6_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy) {
  BasicTensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = (x[i] > T(0) && x[i] < T(6)) ? dy[i] : T(0);
  return dx;
}

// ---------------------------------------------------------------------------
// Global pooling.

// Returns [n, c]; `argmax` receives the flat spatial index of the first
// maximum in row-major order for each (n, c).
template <class T>
BasicTensor<T> global_max_pool(const BasicTensor<T>& x, std::vector<std::int32_t>* argmax = nullptr) {
  detail::require(x.rank() == 4, "global_max_pool: expects NHWC");
  const int n = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  BasicTensor<T> y({n, c}, -std::numeric_limits<T>::infinity());
  if (argmax != nullptr) argmax->assign(static_cast<std::size_t>(n) * c, 0);
  const T* xp = x.data();
  for (int b = 0; b < n; ++b) {
    T* yrow = y.data() + static_cast<std::size_t>(b) * c;
    std::int32_t* arow = argmax != nullptr ? argmax->data() + static_cast<std::size_t>(b) * c : nullptr;
    for (int p = 0; p < hw; ++p) {
      const T* xrow = xp + (static_cast<std::size_t>(b) * hw + p) * c;
      for (int ch = 0; ch < c; ++ch) {
        if (xrow[ch] > yrow[ch]) {
          yrow[ch] = xrow[ch];
          if (arow != nullptr) arow[ch] = p;
        }
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> global_max_pool_backward(const Shape& x_shape, const std::vector<std::int32_t>& argmax,
                                        const BasicTensor<T>& dy) {
  const int n = x_shape[0], hw = x_shape[1] * x_shape[2], c = x_shape[3];
  detail::require(dy.shape() == Shape({n, c}), "global_max_pool_backward: dy shape");
  BasicTensor<T> dx(x_shape);
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t k = static_cast<std::size_t>(b) * c + ch;
      dx[(static_cast<std::size_t>(b) * hw + argmax[k]) * c + ch] += dy[k];
    }
  return dx;
}

template <class T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  detail::require(x.rank() == 4, "global_avg_pool: expects NHWC");
  const int n = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  BasicTensor<T> y({n, c});
  const T inv = T(1) / static_cast<T>(hw);
  for (int b = 0; b < n; ++b) {
    T* yrow = y.data() + static_cast<std::size_t>(b) * c;
    for (int p = 0; p < hw; ++p) {
      const T* xrow = x.data() + (static_cast<std::size_t>(b) * hw + p) * c;
      for (int ch = 0; ch < c; ++ch) yrow[ch] += xrow[ch];
    }
    for (int ch = 0; ch < c; ++ch) yrow[ch] *= inv;
  }
  return y;
}

template <class T>
BasicTensor<T> global_avg_pool_backward(const Shape& x_shape, const BasicTensor<T>& dy) {
  const int n = x_shape[0], hw = x_shape[1] * x_shape[2], c = x_shape[3];
  BasicTensor<T> dx(x_shape);
  const T inv = T(1) / static_cast<T>(hw);
  for (int b = 0; b < n; ++b)
    for (int p = 0; p < hw; ++p) {
      T* dxrow = dx.data() + (static_cast<std::size_t>(b) * hw + p) * c;
      const T* g = dy.data() + static_cast<std::size_t>(b) * c;
      for (int ch = 0; ch < c; ++ch) dxrow[ch] = g[ch] * inv;
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise helpers.

template <class T>
T sigmoid(T z) {
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& z) {
  BasicTensor<T> p(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = sigmoid(z[i]);
  return p;
}

}  // namespace vidscan::nn
