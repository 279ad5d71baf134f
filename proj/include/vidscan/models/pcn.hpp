#pragma once

// Page change network: truncated MobileNetV2 over N stacked grayscale
// frames, global max pool, a stacked LSTM, and two heads (N PCE logits and
// N x attr_dim attribute logits per step). Slot k of step s refers to frame
// s * N + k.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vidscan/framestream.hpp"
#include "vidscan/models/backbone.hpp"
#include "vidscan/nn/lstm.hpp"

namespace vidscan::models {

using nn::LstmState;

struct PcnConfig {
  int n_frames = 1;
  int laf = 5;
  int input_size = 64;
  int lstm_hidden = 64;
  int lstm_layers = 2;
  int bottlenecks = 9;
  double pce_pos_weight = 10.0;
  int attr_dim = 10;

  void validate() const {
    if (n_frames < 1) throw std::invalid_argument("pcn: n_frames must be >= 1");
    if (laf < 0) throw std::invalid_argument("pcn: laf must be >= 0");
    if (input_size < 8 || lstm_hidden < 1 || lstm_layers < 1 || bottlenecks < 1 || attr_dim < 1)
      throw std::invalid_argument("pcn: invalid architecture sizes");
    if (!(pce_pos_weight > 0)) throw std::invalid_argument("pcn: pce_pos_weight must be positive");
  }
};

inline BackboneSpec pcn_backbone_spec(const PcnConfig& cfg) {
  return mobilenet_v2_spec("pcn", cfg.n_frames, 1.0, cfg.bottlenecks, false);
}

inline std::string pcn_lstm_name(int layer, const char* part) {
  return "pcn.lstm." + std::to_string(layer) + "." + part;
}

template <class T>
BasicParamStore<T> build_pcn(const PcnConfig& cfg, Rng& rng) {
  cfg.validate();
  BasicParamStore<T> ps;
  const auto spec = pcn_backbone_spec(cfg);
  add_backbone_params(ps, spec, rng);
  const int h = cfg.lstm_hidden;
  const double k = 1.0 / std::sqrt(static_cast<double>(h));
  int in = spec.out_channels();
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    ps.add(pcn_lstm_name(l, "w_ih"), nn::uniform_tensor<T>({in, 4 * h}, -k, k, rng));
    ps.add(pcn_lstm_name(l, "w_hh"), nn::uniform_tensor<T>({h, 4 * h}, -k, k, rng));
    BasicTensor<T> bias({4 * h});
    for (int j = h; j < 2 * h; ++j) bias[j] = T(1);  // forget gate
    ps.add(pcn_lstm_name(l, "bias"), std::move(bias));
    in = h;
  }
  ps.add("pcn.head.pce.fc", nn::he_uniform<T>({h, cfg.n_frames}, h, rng));
  ps.add("pcn.head.pce.bias", BasicTensor<T>({cfg.n_frames}));
  ps.add("pcn.head.attr.fc", nn::he_uniform<T>({h, cfg.n_frames * cfg.attr_dim}, h, rng));
  ps.add("pcn.head.attr.bias", BasicTensor<T>({cfg.n_frames * cfg.attr_dim}));
  return ps;
}

template <class T>
std::vector<LstmState<T>> pcn_initial_state(const PcnConfig& cfg) {
  return std::vector<LstmState<T>>(static_cast<std::size_t>(cfg.lstm_layers), LstmState<T>::zeros(1, cfg.lstm_hidden));
}

template <class T>
struct PcnOutputs {
  BasicTensor<T> pce_logits;   // [S, N]
  BasicTensor<T> attr_logits;  // [S, N * attr_dim]
};

// Steps per CNN chunk. Bounding activation size keeps every buffer on the
// heap instead of fresh mmap pages, which roughly halves the window cost.
inline constexpr int kPcnChunkSteps = 16;

template <class T>
struct PcnChunkCache {
  BackboneCache<T> cnn;
  Shape feature_shape;
  std::vector<std::int32_t> argmax;
};

template <class T>
struct PcnCache {
  std::vector<PcnChunkCache<T>> chunks;
  std::vector<std::vector<nn::LstmStepCache<T>>> lstm;
  BasicTensor<T> top;  // [S, H], last LSTM layer output
};

// Runs S consecutive steps. x is [S, size, size, N]; `state` carries the
// LSTM state across calls, so S calls with one step each equal one call
// with S steps.
template <class T>
PcnOutputs<T> pcn_forward(const BasicParamStore<T>& ps, const PcnConfig& cfg, const BasicTensor<T>& x,
                          std::vector<LstmState<T>>& state, PcnCache<T>* cache = nullptr) {
  if (x.rank() != 4 || x.dim(1) != cfg.input_size || x.dim(2) != cfg.input_size || x.dim(3) != cfg.n_frames)
    throw nn::ShapeError("pcn: expected input [S, " + std::to_string(cfg.input_size) + ", " +
                         std::to_string(cfg.input_size) + ", " + std::to_string(cfg.n_frames) + "], got " +
                         nn::shape_string(x.shape()));
  if (state.size() != static_cast<std::size_t>(cfg.lstm_layers)) throw nn::ShapeError("pcn: state layer count");
  const int steps = x.dim(0);
  const auto spec = pcn_backbone_spec(cfg);
  const int feat = spec.out_channels();
  BasicTensor<T> seq({steps, 1, feat});
  if (cache != nullptr) {
    cache->chunks.assign(static_cast<std::size_t>((steps + kPcnChunkSteps - 1) / kPcnChunkSteps), {});
    cache->lstm.assign(static_cast<std::size_t>(cfg.lstm_layers), {});
  }
  const std::size_t frame_size = x.size() / static_cast<std::size_t>(std::max(steps, 1));
  for (int s0 = 0, ci = 0; s0 < steps; s0 += kPcnChunkSteps, ++ci) {
    const int len = std::min(kPcnChunkSteps, steps - s0);
    const BasicTensor<T> xc({len, x.dim(1), x.dim(2), x.dim(3)},
                            std::vector<T>(x.data() + s0 * frame_size, x.data() + (s0 + len) * frame_size));
    PcnChunkCache<T>* cc = cache != nullptr ? &cache->chunks[static_cast<std::size_t>(ci)] : nullptr;
    const BasicTensor<T> fmap = backbone_forward(ps, spec, xc, cc != nullptr ? &cc->cnn : nullptr);
    const BasicTensor<T> pooled = nn::global_max_pool(fmap, cc != nullptr ? &cc->argmax : nullptr);
    if (cc != nullptr) cc->feature_shape = fmap.shape();
    std::copy(pooled.data(), pooled.data() + pooled.size(), seq.data() + static_cast<std::size_t>(s0) * feat);
  }
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    const nn::LstmWeights<T> w{ps.value(pcn_lstm_name(l, "w_ih")), ps.value(pcn_lstm_name(l, "w_hh")),
                               ps.value(pcn_lstm_name(l, "bias"))};
    seq = nn::lstm_sequence(seq, state[static_cast<std::size_t>(l)], w,
                            cache != nullptr ? &cache->lstm[static_cast<std::size_t>(l)] : nullptr);
  }
  seq.reshape({steps, cfg.lstm_hidden});
  PcnOutputs<T> out{nn::dense(seq, ps.value("pcn.head.pce.fc"), ps.value("pcn.head.pce.bias")),
                    nn::dense(seq, ps.value("pcn.head.attr.fc"), ps.value("pcn.head.attr.bias"))};
  if (cache != nullptr) cache->top = std::move(seq);
  return out;
}

// Accumulates parameter gradients given dL/d(logits). Truncated at the
// window start: no gradient flows into the initial state.
template <class T>
void pcn_backward(BasicParamStore<T>& ps, const PcnConfig& cfg, const PcnCache<T>& cache,
                  const BasicTensor<T>& d_pce, const BasicTensor<T>& d_attr) {
  const int steps = cache.top.dim(0);
  BasicTensor<T> dh = nn::dense_backward(cache.top, ps.value("pcn.head.pce.fc"), d_pce, ps.grad("pcn.head.pce.fc"),
                                         ps.grad("pcn.head.pce.bias"));
  add_inplace(dh, nn::dense_backward(cache.top, ps.value("pcn.head.attr.fc"), d_attr, ps.grad("pcn.head.attr.fc"),
                                     ps.grad("pcn.head.attr.bias")));
  dh.reshape({steps, 1, cfg.lstm_hidden});
  for (int l = cfg.lstm_layers - 1; l >= 0; --l) {
    const nn::LstmWeights<T> w{ps.value(pcn_lstm_name(l, "w_ih")), ps.value(pcn_lstm_name(l, "w_hh")),
                               ps.value(pcn_lstm_name(l, "bias"))};
    dh = nn::lstm_sequence_backward(
        w, cache.lstm[static_cast<std::size_t>(l)], dh,
        nn::LstmGrads<T>{ps.grad(pcn_lstm_name(l, "w_ih")), ps.grad(pcn_lstm_name(l, "w_hh")),
                         ps.grad(pcn_lstm_name(l, "bias"))});
  }
  const int feat = dh.dim(2);
  const auto spec = pcn_backbone_spec(cfg);
  for (std::size_t ci = 0; ci < cache.chunks.size(); ++ci) {
    const auto& cc = cache.chunks[ci];
    const int s0 = static_cast<int>(ci) * kPcnChunkSteps;
    const int len = cc.feature_shape[0];
    const BasicTensor<T> d_pooled({len, feat}, std::vector<T>(dh.data() + static_cast<std::size_t>(s0) * feat,
                                                              dh.data() + static_cast<std::size_t>(s0 + len) * feat));
    backbone_backward(ps, spec, cc.cnn, nn::global_max_pool_backward(cc.feature_shape, cc.argmax, d_pooled));
  }
}

// Stacks letterboxed frames into [ceil(T/N), size, size, N], scaled to
// [0,1]. A final partial step repeats the last frame.
template <class T = float>
BasicTensor<T> pcn_input(const std::vector<const Frame*>& frames, const PcnConfig& cfg) {
  if (frames.empty()) throw std::invalid_argument("pcn_input: no frames");
  const int n = cfg.n_frames, s = cfg.input_size;
  const int steps = static_cast<int>((frames.size() + static_cast<std::size_t>(n) - 1) / static_cast<std::size_t>(n));
  BasicTensor<T> x({steps, s, s, n});
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  for (int st = 0; st < steps; ++st) {
    for (int k = 0; k < n; ++k) {
      const std::size_t idx = std::min(static_cast<std::size_t>(st) * n + k, frames.size() - 1);
      const Frame& f = *frames[idx];
      if (f.width != s || f.height != s)
        throw nn::ShapeError("pcn_input: frames must be " + std::to_string(s) + "x" + std::to_string(s));
      T* dst = x.data() + static_cast<std::size_t>(st) * plane * n + k;
      for (std::size_t p = 0; p < plane; ++p) dst[p * n] = static_cast<T>(f.pixels[p]) / T(255);
    }
  }
  return x;
}

}  // namespace vidscan::models
