#include <cmath>

#include "doctest.h"
#include "model_gradcases.hpp"
#include "vidscan/models/capn.hpp"
#include "vidscan/models/pcn.hpp"
#include "vidscan/nn/gradcheck.hpp"
#include "vidscan/nn/loss.hpp"

using namespace vidscan;
using namespace vidscan::models;
using nn::BasicTensor;

namespace {

template <class T>
BasicTensor<T> random_tensor(nn::Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  return nn::uniform_tensor<T>(std::move(shape), lo, hi, rng);
}

// Moves every parameter off its initial value so zero-initialized residual
// branches and biases take part in the check.
template <class T>
void jitter(BasicParamStore<T>& ps, Rng& rng, double amount = 0.2) {
  std::uniform_real_distribution<double> d(-amount, amount);
  for (auto& p : ps.params())
    for (auto& v : p.value.values()) v = static_cast<T>(v + d(rng));
}

template <class T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

PcnConfig tiny_pcn(int n = 1) {
  PcnConfig cfg;
  cfg.n_frames = n;
  cfg.input_size = 16;
  cfg.bottlenecks = 4;
  cfg.lstm_hidden = 6;
  return cfg;
}

}  // namespace

TEST_CASE("pcn parameter count and per-frame delta") {
  Rng rng(0);
  const auto p1 = build_pcn<float>(PcnConfig{}, rng).parameter_count();
  CHECK(p1 == 251275);
  PcnConfig c2, c3;
  c2.n_frames = 2;
  c3.n_frames = 3;
  const auto p2 = build_pcn<float>(c2, rng).parameter_count();
  const auto p3 = build_pcn<float>(c3, rng).parameter_count();
  CHECK(p2 - p1 == 1003);
  CHECK(p3 - p2 == 1003);
}

TEST_CASE("capn parameter count") {
  Rng rng(0);
  CHECK(build_capn<float>(CapnConfig{}, rng).parameter_count() == 408650);
  const auto spec = capn_backbone_spec(CapnConfig{});
  CHECK(spec.blocks.size() == 17);
  CHECK(spec.out_channels() == 1280);
}

TEST_CASE("pcn backbone layout") {
  const auto spec = pcn_backbone_spec(PcnConfig{});
  REQUIRE(spec.blocks.size() == 9);
  CHECK(spec.stem_channels == 32);
  CHECK(spec.out_channels() == 64);
  CHECK(spec.blocks[0].expansion == 1);
  CHECK(spec.blocks[1].stride == 2);
  CHECK(spec.blocks[3].stride == 2);
  CHECK(spec.blocks[6].stride == 2);
  CHECK(spec.blocks[8].residual());
}

TEST_CASE("residual blocks start as the identity") {
  Rng rng(1);
  const auto ps = build_pcn<float>(PcnConfig{}, rng);
  const auto spec = pcn_backbone_spec(PcnConfig{});
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& scale = ps.value("pcn.block." + std::to_string(i) + ".project.scale");
    const float expect = spec.blocks[i].residual() ? 0.0f : 1.0f;
    for (float v : scale.values()) CHECK(v == expect);
  }
  const auto& bias = ps.value(pcn_lstm_name(0, "bias"));
  CHECK(bias[0] == 0.0f);
  CHECK(bias[64] == 1.0f);  // forget gate
  CHECK(bias[128] == 0.0f);
}

TEST_CASE("zeroed heads predict one half everywhere") {
  Rng rng(2);
  const PcnConfig cfg = tiny_pcn(2);
  auto ps = build_pcn<float>(cfg, rng);
  for (const char* n : {"pcn.head.pce.fc", "pcn.head.pce.bias", "pcn.head.attr.fc", "pcn.head.attr.bias"})
    ps.value(n).fill(0.0f);
  auto state = pcn_initial_state<float>(cfg);
  const auto out = pcn_forward(ps, cfg, random_tensor<float>({5, 16, 16, 2}, rng), state);
  CHECK(out.pce_logits.shape() == nn::Shape({5, 2}));
  CHECK(out.attr_logits.shape() == nn::Shape({5, 20}));
  const auto p_pce = nn::sigmoid(out.pce_logits), p_attr = nn::sigmoid(out.attr_logits);
  for (float v : p_pce.values()) CHECK(v == 0.5f);
  for (float v : p_attr.values()) CHECK(v == 0.5f);
}

TEST_CASE("pcn streaming equals window evaluation") {
  Rng rng(3);
  for (int n : {1, 2}) {
    const PcnConfig cfg = tiny_pcn(n);
    auto ps = build_pcn<float>(cfg, rng);
    jitter(ps, rng);
    const int steps = 37;  // spans more than two CNN chunks
    const auto x = random_tensor<float>({steps, 16, 16, n}, rng);
    auto batch_state = pcn_initial_state<float>(cfg);
    const auto batch = pcn_forward(ps, cfg, x, batch_state);
    auto state = pcn_initial_state<float>(cfg);
    const std::size_t plane = x.size() / steps;
    for (int s = 0; s < steps; ++s) {
      const BasicTensor<float> xs({1, 16, 16, n}, std::vector<float>(x.data() + s * plane, x.data() + (s + 1) * plane));
      const auto one = pcn_forward(ps, cfg, xs, state);
      for (int k = 0; k < n; ++k) CHECK(std::abs(one.pce_logits[k] - batch.pce_logits[s * n + k]) <= 1e-5);
      for (int k = 0; k < n * cfg.attr_dim; ++k)
        CHECK(std::abs(one.attr_logits[k] - batch.attr_logits[s * n * cfg.attr_dim + k]) <= 1e-5);
    }
    for (std::size_t l = 0; l < state.size(); ++l) {
      CHECK(max_abs_diff(state[l].h, batch_state[l].h) <= 1e-5);
      CHECK(max_abs_diff(state[l].c, batch_state[l].c) <= 1e-5);
    }
  }
}

TEST_CASE("pcn rejects mismatched input") {
  Rng rng(4);
  const PcnConfig cfg = tiny_pcn(2);
  const auto ps = build_pcn<float>(cfg, rng);
  auto state = pcn_initial_state<float>(cfg);
  CHECK_THROWS_AS(pcn_forward(ps, cfg, BasicTensor<float>({1, 16, 16, 1}), state), nn::ShapeError);
  CHECK_THROWS_AS(pcn_forward(ps, cfg, BasicTensor<float>({1, 8, 8, 2}), state), nn::ShapeError);
  PcnConfig bad = cfg;
  bad.n_frames = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("pcn_input stacks frames and repeats the last") {
  PcnConfig cfg = tiny_pcn(2);
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.emplace_back(16, 16, static_cast<std::uint8_t>(51 * (i + 1)));
  std::vector<const Frame*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  const auto x = pcn_input<float>(ptrs, cfg);
  CHECK(x.shape() == nn::Shape({2, 16, 16, 2}));
  CHECK(x[0] == doctest::Approx(0.2));
  CHECK(x[1] == doctest::Approx(0.4));
  const std::size_t step = 16 * 16 * 2;
  CHECK(x[step] == doctest::Approx(0.6));
  CHECK(x[step + 1] == doctest::Approx(0.6));
  Frame wrong(8, 8);
  CHECK_THROWS_AS(pcn_input<float>({&wrong}, cfg), nn::ShapeError);
}

TEST_CASE("stem weight gradient matches the full conv backward") {
  Rng rng(5);
  const auto x = random_tensor<double>({2, 9, 7, 3}, rng, -1, 1);
  const auto w = random_tensor<double>({3, 3, 3, 4}, rng, -1, 1);
  for (int stride : {1, 2}) {
    const auto y = nn::conv2d(x, w, stride, true);
    const auto dy = random_tensor<double>(y.shape(), rng, -1, 1);
    BasicTensor<double> dw_full(w.shape()), dw_only(w.shape());
    nn::conv2d_backward(x, w, stride, true, dy, dw_full);
    nn::conv2d_backward_weights(x, w, stride, true, dy, dw_only);
    CHECK(max_abs_diff(dw_full, dw_only) < 1e-12);
  }
}

TEST_CASE("pcn gradient matches finite differences") {
  for (int n : {1, 3}) {
    const auto r = vidscan::testing::pcn_grad_check(n);
    INFO("n=", n, " worst=", r.worst_param, "[", r.worst_index, "] skipped=", r.skipped);
    CHECK(r.max_rel_error < 1e-3);
    CHECK(r.skipped * 50 <= r.checked);
  }
}

TEST_CASE("capn gradient matches finite differences") {
  const auto r = vidscan::testing::capn_grad_check();
  INFO("worst=", r.worst_param, "[", r.worst_index, "] skipped=", r.skipped);
  CHECK(r.max_rel_error < 1e-3);
  CHECK(r.skipped * 50 <= r.checked);
}

TEST_CASE("capn output shape and input scaling") {
  Rng rng(8);
  CapnConfig cfg;
  cfg.input_size = 32;
  const auto ps = build_capn<float>(cfg, rng);
  Frame a(32, 32, 255), b(32, 32, 0);
  const auto x = capn_input<float>({&a, &b}, cfg);
  CHECK(x.shape() == nn::Shape({2, 32, 32, 1}));
  CHECK(x[0] == 1.0f);
  CHECK(x[32 * 32] == 0.0f);
  CHECK(capn_forward_logits(ps, cfg, x).shape() == nn::Shape({2, 10}));
}
