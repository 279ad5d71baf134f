#pragma once

// LSTM cell with gates ordered [i, f, g, o] along the 4H axis:
//   z = x W_ih + h W_hh + b
//   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
//   c' = f * c + i * g,   h' = o * tanh(c')
// Sequences are time-major: [T, B, features].

#include <vector>

#include "vidscan/nn/kernels.hpp"

namespace vidscan::nn {

template <class T>
struct LstmState {
  BasicTensor<T> h;  // [B, H]
  BasicTensor<T> c;  // [B, H]

  static LstmState zeros(int batch, int hidden) { return {BasicTensor<T>({batch, hidden}), BasicTensor<T>({batch, hidden})}; }
};

template <class T>
struct LstmWeights {
  const BasicTensor<T>& w_ih;  // [In, 4H]
  const BasicTensor<T>& w_hh;  // [H, 4H]
  const BasicTensor<T>& bias;  // [4H]
  int hidden() const { return w_hh.dim(0); }
};

template <class T>
struct LstmGrads {
  BasicTensor<T>& w_ih;
  BasicTensor<T>& w_hh;
  BasicTensor<T>& bias;
};

template <class T>
struct LstmStepCache {
  BasicTensor<T> x, h_prev, c_prev;
  BasicTensor<T> gates;   // activated [B, 4H]
  BasicTensor<T> tanh_c;  // [B, H]
};

template <class T>
LstmState<T> lstm_step(const BasicTensor<T>& x, const LstmState<T>& state, const LstmWeights<T>& w,
                       LstmStepCache<T>* cache = nullptr) {
  const int hidden = w.hidden();
  detail::require(w.w_hh.dim(1) == 4 * hidden && w.w_ih.dim(1) == 4 * hidden, "lstm: weight shapes");
  detail::require(x.rank() == 2 && x.dim(1) == w.w_ih.dim(0), "lstm: input width");
  const int batch = x.dim(0);
  detail::require(state.h.shape() == Shape({batch, hidden}) && state.c.shape() == Shape({batch, hidden}),
                  "lstm: state shape mismatch");
  BasicTensor<T> z = dense(x, w.w_ih, w.bias);
  add_inplace(z, pointwise_conv(state.h, w.w_hh));
  LstmState<T> next = LstmState<T>::zeros(batch, hidden);
  BasicTensor<T> tanh_c({batch, hidden});
  for (int b = 0; b < batch; ++b) {
    T* zr = z.data() + static_cast<std::size_t>(b) * 4 * hidden;
    for (int k = 0; k < hidden; ++k) {
      const T i = sigmoid(zr[k]);
      const T f = sigmoid(zr[hidden + k]);
      const T g = std::tanh(zr[2 * hidden + k]);
      const T o = sigmoid(zr[3 * hidden + k]);
      zr[k] = i;
      zr[hidden + k] = f;
      zr[2 * hidden + k] = g;
      zr[3 * hidden + k] = o;
      const std::size_t idx = static_cast<std::size_t>(b) * hidden + k;
      const T c = f * state.c[idx] + i * g;
      const T tc = std::tanh(c);
      next.c[idx] = c;
      next.h[idx] = o * tc;
      tanh_c[idx] = tc;
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->gates = std::move(z);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

namespace detail {

template <class T>
BasicTensor<T> time_slice(const BasicTensor<T>& seq, int t) {
  const int b = seq.dim(1), f = seq.dim(2);
  const std::size_t n = static_cast<std::size_t>(b) * f;
  std::vector<T> data(seq.data() + t * n, seq.data() + (t + 1) * n);
  return BasicTensor<T>({b, f}, std::move(data));
}

template <class T>
void set_time_slice(BasicTensor<T>& seq, int t, const BasicTensor<T>& slice) {
  std::copy(slice.data(), slice.data() + slice.size(), seq.data() + t * slice.size());
}

}  // namespace detail

// Runs the layer over a [T, B, In] sequence, returning [T, B, H] outputs.
// `state` is updated in place to the final state.
template <class T>
BasicTensor<T> lstm_sequence(const BasicTensor<T>& xs, LstmState<T>& state, const LstmWeights<T>& w,
                             std::vector<LstmStepCache<T>>* caches = nullptr) {
  detail::require(xs.rank() == 3, "lstm_sequence: expects [T, B, In]");
  const int steps = xs.dim(0), batch = xs.dim(1), hidden = w.hidden();
  BasicTensor<T> out({steps, batch, hidden});
  if (caches != nullptr) caches->assign(static_cast<std::size_t>(steps), {});
  for (int t = 0; t < steps; ++t) {
    state = lstm_step(detail::time_slice(xs, t), state, w, caches != nullptr ? &(*caches)[t] : nullptr);
    detail::set_time_slice(out, t, state.h);
  }
  return out;
}

// Backpropagation through time. `dh_out` is the gradient of the loss with
// respect to every output h_t. Returns dL/dx as [T, B, In]; if `dstate0` is
// given it receives the gradient with respect to the initial state.
template <class T>
BasicTensor<T> lstm_sequence_backward(const LstmWeights<T>& w, const std::vector<LstmStepCache<T>>& caches,
                                      const BasicTensor<T>& dh_out, LstmGrads<T> grads,
                                      LstmState<T>* dstate0 = nullptr) {
  const int steps = static_cast<int>(caches.size());
  detail::require(steps > 0 && dh_out.dim(0) == steps, "lstm_sequence_backward: step count");
  const int batch = dh_out.dim(1), hidden = w.hidden(), in = w.w_ih.dim(0);
  BasicTensor<T> dxs({steps, batch, in});
  BasicTensor<T> dh_next({batch, hidden});
  BasicTensor<T> dc_next({batch, hidden});
  BasicTensor<T> dz({batch, 4 * hidden});
  for (int t = steps - 1; t >= 0; --t) {
    const auto& cache = caches[static_cast<std::size_t>(t)];
    for (int b = 0; b < batch; ++b) {
      const T* gr = cache.gates.data() + static_cast<std::size_t>(b) * 4 * hidden;
      T* dzr = dz.data() + static_cast<std::size_t>(b) * 4 * hidden;
      for (int k = 0; k < hidden; ++k) {
        const std::size_t idx = static_cast<std::size_t>(b) * hidden + k;
        const std::size_t tidx = (static_cast<std::size_t>(t) * batch + b) * hidden + k;
        const T i = gr[k], f = gr[hidden + k], g = gr[2 * hidden + k], o = gr[3 * hidden + k];
        const T tc = cache.tanh_c[idx];
        const T dh = dh_out[tidx] + dh_next[idx];
        const T dc = dh * o * (T(1) - tc * tc) + dc_next[idx];
        dzr[k] = dc * g * i * (T(1) - i);
        dzr[hidden + k] = dc * cache.c_prev[idx] * f * (T(1) - f);
        dzr[2 * hidden + k] = dc * i * (T(1) - g * g);
        dzr[3 * hidden + k] = dh * tc * o * (T(1) - o);
        dc_next[idx] = dc * f;
      }
    }
    const BasicTensor<T> dx = dense_backward(cache.x, w.w_ih, dz, grads.w_ih, grads.bias);
    dh_next = pointwise_conv_backward(cache.h_prev, w.w_hh, dz, grads.w_hh);
    detail::set_time_slice(dxs, t, dx);
  }
  if (dstate0 != nullptr) *dstate0 = {dh_next, dc_next};
  return dxs;
}

}  // namespace vidscan::nn
