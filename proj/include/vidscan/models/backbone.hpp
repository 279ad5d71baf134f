#pragma once

// MobileNetV2-style feature extractor shared by both networks: a 3x3
// stride-2 stem, a list of inverted-residual bottlenecks and an optional
// final 1x1 conv. Batch normalization is replaced by a learned per-channel
// affine. Parameter names are "<prefix>.stem.conv", "<prefix>.block.<i>.
// {expand,dw,project}.{conv,scale,bias}" and "<prefix>.last.{conv,...}".

#include <string>
#include <vector>

#include "vidscan/nn/kernels.hpp"
#include "vidscan/nn/params.hpp"

namespace vidscan::models {

using nn::BasicParamStore;
using nn::BasicTensor;
using nn::Rng;
using nn::Shape;

struct BottleneckSpec {
  int in_channels = 0;
  int out_channels = 0;
  int expansion = 1;
  int stride = 1;

  int hidden() const { return in_channels * expansion; }
  bool residual() const { return stride == 1 && in_channels == out_channels; }
};

struct BackboneSpec {
  std::string prefix;
  int in_channels = 1;
  int stem_channels = 32;
  std::vector<BottleneckSpec> blocks;
  int last_channels = 0;  // 0: no final 1x1 conv

  int out_channels() const {
    if (last_channels > 0) return last_channels;
    return blocks.empty() ? stem_channels : blocks.back().out_channels;
  }
};

// Rounds to a multiple of `divisor`, never dropping more than 10%.
inline int make_divisible(double v, int divisor = 8) {
  int n = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
  if (n < 0.9 * v) n += divisor;
  return n;
}

// Stock MobileNetV2 (t, c, n, s) schedule.
struct StageSpec {
  int expansion, channels, repeats, stride;
};
inline constexpr StageSpec kMobileNetV2Stages[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                                                   {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};

// The first `max_blocks` bottlenecks of MobileNetV2 at the given width.
inline BackboneSpec mobilenet_v2_spec(std::string prefix, int in_channels, double width, int max_blocks,
                                      bool with_last_conv) {
  BackboneSpec spec;
  spec.prefix = std::move(prefix);
  spec.in_channels = in_channels;
  spec.stem_channels = make_divisible(32 * width);
  int c = spec.stem_channels;
  for (const auto& st : kMobileNetV2Stages) {
    const int out = make_divisible(st.channels * width);
    for (int r = 0; r < st.repeats; ++r) {
      if (static_cast<int>(spec.blocks.size()) == max_blocks) break;
      spec.blocks.push_back({c, out, st.expansion, r == 0 ? st.stride : 1});
      c = out;
    }
  }
  if (with_last_conv) spec.last_channels = width > 1.0 ? make_divisible(1280 * width) : 1280;
  return spec;
}

namespace detail {

template <class T>
void add_affine(BasicParamStore<T>& ps, const std::string& name, int channels, T scale = T(1)) {
  ps.add(name + ".scale", BasicTensor<T>({channels}, scale));
  ps.add(name + ".bias", BasicTensor<T>({channels}));
}

inline std::string block_name(const BackboneSpec& spec, std::size_t i) {
  return spec.prefix + ".block." + std::to_string(i);
}

}  // namespace detail

// He-uniform convolution weights; affines start at scale 1, bias 0, except
// the projection affine of residual blocks, which starts at 0 so every
// residual block is initially the identity.
template <class T>
void add_backbone_params(BasicParamStore<T>& ps, const BackboneSpec& spec, Rng& rng) {
  using nn::he_uniform;
  ps.add(spec.prefix + ".stem.conv", he_uniform<T>({3, 3, spec.in_channels, spec.stem_channels}, 9 * spec.in_channels, rng));
  detail::add_affine(ps, spec.prefix + ".stem", spec.stem_channels);
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& b = spec.blocks[i];
    const std::string p = detail::block_name(spec, i);
    const int hid = b.hidden();
    if (b.expansion != 1) {
      ps.add(p + ".expand.conv", he_uniform<T>({b.in_channels, hid}, b.in_channels, rng));
      detail::add_affine(ps, p + ".expand", hid);
    }
    ps.add(p + ".dw.conv", he_uniform<T>({3, 3, hid}, 9, rng));
    detail::add_affine(ps, p + ".dw", hid);
    ps.add(p + ".project.conv", he_uniform<T>({hid, b.out_channels}, hid, rng));
    detail::add_affine(ps, p + ".project", b.out_channels, b.residual() ? T(0) : T(1));
  }
  if (spec.last_channels > 0) {
    const int c = spec.blocks.empty() ? spec.stem_channels : spec.blocks.back().out_channels;
    ps.add(spec.prefix + ".last.conv", he_uniform<T>({c, spec.last_channels}, c, rng));
    detail::add_affine(ps, spec.prefix + ".last", spec.last_channels);
  }
}

template <class T>
struct BlockCache {
  BasicTensor<T> x, e_pre, e, d_pre, d, p_pre;
};

template <class T>
struct BackboneCache {
  BasicTensor<T> input, stem_pre, stem_out;
  std::vector<BlockCache<T>> blocks;
  BasicTensor<T> last_in, last_pre, last_out;
};

// Returns the final NHWC feature map (before pooling).
template <class T>
BasicTensor<T> backbone_forward(const BasicParamStore<T>& ps, const BackboneSpec& spec, const BasicTensor<T>& x,
                                BackboneCache<T>* cache = nullptr) {
  using namespace nn;
  const std::string& pre = spec.prefix;
  BasicTensor<T> stem_pre = conv2d(x, ps.value(pre + ".stem.conv"), 2, true);
  BasicTensor<T> h = channel_affine(stem_pre, ps.value(pre + ".stem.scale"), ps.value(pre + ".stem.bias"), true);
  if (cache != nullptr) {
    cache->input = x;
    cache->stem_pre = std::move(stem_pre);
    cache->stem_out = h;
    cache->blocks.assign(spec.blocks.size(), {});
  }
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& b = spec.blocks[i];
    const std::string p = detail::block_name(spec, i);
    BlockCache<T> bc;
    BasicTensor<T> e;
    if (b.expansion != 1) {
      bc.e_pre = pointwise_conv(h, ps.value(p + ".expand.conv"));
      e = channel_affine(bc.e_pre, ps.value(p + ".expand.scale"), ps.value(p + ".expand.bias"), true);
    } else {
      e = h;
    }
    bc.d_pre = depthwise_conv2d(e, ps.value(p + ".dw.conv"), b.stride, true);
    bc.d = channel_affine(bc.d_pre, ps.value(p + ".dw.scale"), ps.value(p + ".dw.bias"), true);
    bc.p_pre = pointwise_conv(bc.d, ps.value(p + ".project.conv"));
    BasicTensor<T> y = channel_affine(bc.p_pre, ps.value(p + ".project.scale"), ps.value(p + ".project.bias"));
    if (b.residual()) add_inplace(y, h);
    if (cache != nullptr) {
      bc.x = std::move(h);
      bc.e = std::move(e);
      cache->blocks[i] = std::move(bc);
    }
    h = std::move(y);
  }
  if (spec.last_channels > 0) {
    BasicTensor<T> last_pre = pointwise_conv(h, ps.value(pre + ".last.conv"));
    BasicTensor<T> out = channel_affine(last_pre, ps.value(pre + ".last.scale"), ps.value(pre + ".last.bias"), true);
    if (cache != nullptr) {
      cache->last_in = std::move(h);
      cache->last_pre = std::move(last_pre);
      cache->last_out = out;
    }
    h = std::move(out);
  }
  return h;
}

// Accumulates parameter gradients from dL/d(feature map). The input
// gradient is not needed by either network and is not computed.
template <class T>
void backbone_backward(BasicParamStore<T>& ps, const BackboneSpec& spec, const BackboneCache<T>& cache,
                       BasicTensor<T> dy) {
  using namespace nn;
  const std::string& pre = spec.prefix;
  if (spec.last_channels > 0) {
    const auto d_pre = channel_affine_backward(cache.last_pre, ps.value(pre + ".last.scale"), cache.last_out, true, dy,
                                               ps.grad(pre + ".last.scale"), ps.grad(pre + ".last.bias"));
    dy = pointwise_conv_backward(cache.last_in, ps.value(pre + ".last.conv"), d_pre, ps.grad(pre + ".last.conv"));
  }
  for (std::size_t k = spec.blocks.size(); k-- > 0;) {
    const auto& b = spec.blocks[k];
    const auto& bc = cache.blocks[k];
    const std::string p = detail::block_name(spec, k);
    const auto dp_pre = channel_affine_backward(bc.p_pre, ps.value(p + ".project.scale"), bc.p_pre, false, dy,
                                                ps.grad(p + ".project.scale"), ps.grad(p + ".project.bias"));
    const auto dd = pointwise_conv_backward(bc.d, ps.value(p + ".project.conv"), dp_pre, ps.grad(p + ".project.conv"));
    const auto dd_pre = channel_affine_backward(bc.d_pre, ps.value(p + ".dw.scale"), bc.d, true, dd,
                                                ps.grad(p + ".dw.scale"), ps.grad(p + ".dw.bias"));
    auto de = depthwise_conv2d_backward(bc.e, ps.value(p + ".dw.conv"), b.stride, true, dd_pre, ps.grad(p + ".dw.conv"));
    BasicTensor<T> dx;
    if (b.expansion != 1) {
      const auto de_pre = channel_affine_backward(bc.e_pre, ps.value(p + ".expand.scale"), bc.e, true, de,
                                                  ps.grad(p + ".expand.scale"), ps.grad(p + ".expand.bias"));
      dx = pointwise_conv_backward(bc.x, ps.value(p + ".expand.conv"), de_pre, ps.grad(p + ".expand.conv"));
    } else {
      dx = std::move(de);
    }
    if (b.residual()) add_inplace(dx, dy);
    dy = std::move(dx);
  }
  const auto d_stem = channel_affine_backward(cache.stem_pre, ps.value(pre + ".stem.scale"), cache.stem_out, true, dy,
                                              ps.grad(pre + ".stem.scale"), ps.grad(pre + ".stem.bias"));
  conv2d_backward_weights(cache.input, ps.value(pre + ".stem.conv"), 2, true, d_stem, ps.grad(pre + ".stem.conv"));
}

}  // namespace vidscan::models
