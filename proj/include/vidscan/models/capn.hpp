#pragma once

// Capture network: full MobileNetV2 at a width multiplier over one
// grayscale frame, global average pool, and a dense layer to attr_dim
// logits.

#include <stdexcept>

#include "vidscan/framestream.hpp"
#include "vidscan/models/backbone.hpp"

namespace vidscan::models {

struct CapnConfig {
  int input_size = 320;
  double width = 0.35;
  int attr_dim = 10;

  void validate() const {
    if (input_size < 32) throw std::invalid_argument("capn: input_size must be >= 32");
    if (!(width > 0)) throw std::invalid_argument("capn: width must be positive");
    if (attr_dim < 1) throw std::invalid_argument("capn: attr_dim must be >= 1");
  }
};

inline BackboneSpec capn_backbone_spec(const CapnConfig& cfg) {
  return mobilenet_v2_spec("capn", 1, cfg.width, 17, true);
}

template <class T>
BasicParamStore<T> build_capn(const CapnConfig& cfg, Rng& rng) {
  cfg.validate();
  BasicParamStore<T> ps;
  const auto spec = capn_backbone_spec(cfg);
  add_backbone_params(ps, spec, rng);
  ps.add("capn.head.fc", nn::he_uniform<T>({spec.out_channels(), cfg.attr_dim}, spec.out_channels(), rng));
  ps.add("capn.head.bias", BasicTensor<T>({cfg.attr_dim}));
  return ps;
}

template <class T>
struct CapnCache {
  BackboneCache<T> cnn;
  Shape feature_shape;
  BasicTensor<T> pooled;
};

// x is [B, size, size, 1]; returns [B, attr_dim] logits.
template <class T>
BasicTensor<T> capn_forward_logits(const BasicParamStore<T>& ps, const CapnConfig& cfg, const BasicTensor<T>& x,
                                   CapnCache<T>* cache = nullptr) {
  if (x.rank() != 4 || x.dim(1) != cfg.input_size || x.dim(2) != cfg.input_size || x.dim(3) != 1)
    throw nn::ShapeError("capn: expected input [B, " + std::to_string(cfg.input_size) + ", " +
                         std::to_string(cfg.input_size) + ", 1], got " + nn::shape_string(x.shape()));
  const BasicTensor<T> fmap = backbone_forward(ps, capn_backbone_spec(cfg), x, cache != nullptr ? &cache->cnn : nullptr);
  BasicTensor<T> pooled = nn::global_avg_pool(fmap);
  BasicTensor<T> logits = nn::dense(pooled, ps.value("capn.head.fc"), ps.value("capn.head.bias"));
  if (cache != nullptr) {
    cache->feature_shape = fmap.shape();
    cache->pooled = std::move(pooled);
  }
  return logits;
}

template <class T>
void capn_backward(BasicParamStore<T>& ps, const CapnConfig& cfg, const CapnCache<T>& cache,
                   const BasicTensor<T>& d_logits) {
  const auto d_pooled = nn::dense_backward(cache.pooled, ps.value("capn.head.fc"), d_logits, ps.grad("capn.head.fc"),
                                           ps.grad("capn.head.bias"));
  backbone_backward(ps, capn_backbone_spec(cfg), cache.cnn, nn::global_avg_pool_backward(cache.feature_shape, d_pooled));
}

// Letterboxed size x size frames to [B, size, size, 1] in [0,1].
template <class T = float>
BasicTensor<T> capn_input(const std::vector<const Frame*>& frames, const CapnConfig& cfg) {
  const int s = cfg.input_size;
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  BasicTensor<T> x({static_cast<int>(frames.size()), s, s, 1});
  for (std::size_t b = 0; b < frames.size(); ++b) {
    const Frame& f = *frames[b];
    if (f.width != s || f.height != s)
      throw nn::ShapeError("capn_input: frames must be " + std::to_string(s) + "x" + std::to_string(s));
    T* dst = x.data() + b * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(f.pixels[p]) / T(255);
  }
  return x;
}

}  // namespace vidscan::models
