#pragma once

// Randomized gradient-check fixtures for every tensornet kernel. Shared by
// the unit tests and the acceptance suite.

#include <functional>
#include <string>
#include <vector>

#include "vidscan/nn/gradcheck.hpp"
#include "vidscan/nn/kernels.hpp"
#include "vidscan/nn/loss.hpp"
#include "vidscan/nn/lstm.hpp"

namespace vidscan::testing {

using nn::BasicParamStore;
using nn::BasicTensor;
using nn::Rng;
using nn::Shape;

template <class T>
struct GradCase {
  std::string name;
  BasicParamStore<T> store;
  std::function<double(BasicParamStore<T>&)> loss_and_grad;
};

// Values away from the ReLU6 kinks at 0 and 6.
template <class T>
BasicTensor<T> random_away_from_kinks(Shape shape, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-2.0, 8.0);
  for (auto& v : t.values()) {
    double x;
    do x = dist(rng);
    while (std::abs(x) < 0.05 || std::abs(x - 6.0) < 0.05);
    v = static_cast<T>(x);
  }
  return t;
}

// Distinct values spaced at least 0.01 apart so max-pool ties cannot flip
// under a 1e-3 perturbation.
template <class T>
BasicTensor<T> random_distinct(Shape shape, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  std::vector<int> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(-1.0 + 0.01 * order[i]);
  return t;
}

// L = sum(y * R), accumulated in double.
template <class T>
double project(const BasicTensor<T>& y, const BasicTensor<T>& r, BasicTensor<T>* dy) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += static_cast<double>(y[i]) * static_cast<double>(r[i]);
  if (dy != nullptr) *dy = r;
  return sum;
}

template <class T>
std::vector<GradCase<T>> kernel_grad_cases(std::uint64_t seed, int n = 4, int h = 6, int w = 6, int c = 3) {
  using nn::uniform_tensor;
  Rng rng(seed);
  std::vector<GradCase<T>> cases;
  const Shape xs{n, h, w, c};

  for (int stride : {1, 2}) {
    for (bool same : {true, false}) {
      GradCase<T> gc;
      gc.name = "conv2d/s" + std::to_string(stride) + (same ? "/same" : "/valid");
      gc.store.add("x", uniform_tensor<T>(xs, -1, 1, rng));
      gc.store.add("w", uniform_tensor<T>({3, 3, c, 5}, -1, 1, rng));
      const auto g = nn::conv_geometry(h, w, 3, 3, stride, same);
      auto r = uniform_tensor<T>({n, g.out_h, g.out_w, 5}, -1, 1, rng);
      gc.loss_and_grad = [stride, same, r](BasicParamStore<T>& s) {
        s.zero_grad();
        const auto y = nn::conv2d(s.value("x"), s.value("w"), stride, same);
        BasicTensor<T> dy;
        const double loss = project(y, r, &dy);
        s.grad("x") = nn::conv2d_backward(s.value("x"), s.value("w"), stride, same, dy, s.grad("w"));
        return loss;
      };
      cases.push_back(std::move(gc));
    }
  }

  for (int stride : {1, 2}) {
    GradCase<T> gc;
    gc.name = "depthwise_conv2d/s" + std::to_string(stride);
    gc.store.add("x", uniform_tensor<T>(xs, -1, 1, rng));
    gc.store.add("w", uniform_tensor<T>({3, 3, c}, -1, 1, rng));
    const auto g = nn::conv_geometry(h, w, 3, 3, stride, true);
    auto r = uniform_tensor<T>({n, g.out_h, g.out_w, c}, -1, 1, rng);
    gc.loss_and_grad = [stride, r](BasicParamStore<T>& s) {
      s.zero_grad();
      const auto y = nn::depthwise_conv2d(s.value("x"), s.value("w"), stride, true);
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::depthwise_conv2d_backward(s.value("x"), s.value("w"), stride, true, dy, s.grad("w"));
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  {
    GradCase<T> gc;
    gc.name = "pointwise_conv";
    gc.store.add("x", uniform_tensor<T>(xs, -1, 1, rng));
    gc.store.add("w", uniform_tensor<T>({c, 7}, -1, 1, rng));
    auto r = uniform_tensor<T>({n, h, w, 7}, -1, 1, rng);
    gc.loss_and_grad = [r](BasicParamStore<T>& s) {
      s.zero_grad();
      const auto y = nn::pointwise_conv(s.value("x"), s.value("w"));
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::pointwise_conv_backward(s.value("x"), s.value("w"), dy, s.grad("w"));
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  {
    GradCase<T> gc;
    gc.name = "dense";
    gc.store.add("x", uniform_tensor<T>({n, h * c}, -1, 1, rng));
    gc.store.add("w", uniform_tensor<T>({h * c, 5}, -1, 1, rng));
    gc.store.add("b", uniform_tensor<T>({5}, -1, 1, rng));
    auto r = uniform_tensor<T>({n, 5}, -1, 1, rng);
    gc.loss_and_grad = [r](BasicParamStore<T>& s) {
      s.zero_grad();
      const auto y = nn::dense(s.value("x"), s.value("w"), s.value("b"));
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::dense_backward(s.value("x"), s.value("w"), dy, s.grad("w"), s.grad("b"));
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  for (bool act : {false, true}) {
    GradCase<T> gc;
    gc.name = act ? "channel_affine+relu6" : "channel_affine";
    // With the activation, inputs are chosen so affine outputs avoid the kinks.
    gc.store.add("x", act ? random_away_from_kinks<T>(xs, rng) : uniform_tensor<T>(xs, -1, 1, rng));
    gc.store.add("scale", BasicTensor<T>({c}, T(1)));
    gc.store.add("bias", BasicTensor<T>({c}, T(0)));
    if (!act) {
      gc.store.value("scale") = uniform_tensor<T>({c}, 0.5, 2, rng);
      gc.store.value("bias") = uniform_tensor<T>({c}, -1, 1, rng);
    }
    auto r = uniform_tensor<T>(xs, -1, 1, rng);
    gc.loss_and_grad = [act, r](BasicParamStore<T>& s) {
      s.zero_grad();
      const auto y = nn::channel_affine(s.value("x"), s.value("scale"), s.value("bias"), act);
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::channel_affine_backward(s.value("x"), s.value("scale"), y, act, dy, s.grad("scale"),
                                                s.grad("bias"));
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  {
    GradCase<T> gc;
    gc.name = "relu6";
    gc.store.add("x", random_away_from_kinks<T>(xs, rng));
    auto r = uniform_tensor<T>(xs, -1, 1, rng);
    gc.loss_and_grad = [r](BasicParamStore<T>& s) {
      s.zero_grad();
      const auto y = nn::relu6(s.value("x"));
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::relu6_backward(s.value("x"), dy);
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  {
    GradCase<T> gc;
    gc.name = "global_max_pool";
    gc.store.add("x", random_distinct<T>(xs, rng));
    auto r = uniform_tensor<T>({n, c}, -1, 1, rng);
    gc.loss_and_grad = [r](BasicParamStore<T>& s) {
      s.zero_grad();
      std::vector<std::int32_t> argmax;
      const auto y = nn::global_max_pool(s.value("x"), &argmax);
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::global_max_pool_backward(s.value("x").shape(), argmax, dy);
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  {
    GradCase<T> gc;
    gc.name = "global_avg_pool";
    gc.store.add("x", uniform_tensor<T>(xs, -1, 1, rng));
    auto r = uniform_tensor<T>({n, c}, -1, 1, rng);
    gc.loss_and_grad = [r](BasicParamStore<T>& s) {
      s.zero_grad();
      const auto y = nn::global_avg_pool(s.value("x"));
      BasicTensor<T> dy;
      const double loss = project(y, r, &dy);
      s.grad("x") = nn::global_avg_pool_backward(s.value("x").shape(), dy);
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  {
    // Two stacked layers over a short sequence, including initial-state
    // gradients (backprop through time).
    const int steps = 5, in = 4, hidden = 3;
    GradCase<T> gc;
    gc.name = "lstm_bptt";
    gc.store.add("x", uniform_tensor<T>({steps, n, in}, -1, 1, rng));
    gc.store.add("h0", uniform_tensor<T>({n, hidden}, -0.5, 0.5, rng));
    gc.store.add("c0", uniform_tensor<T>({n, hidden}, -0.5, 0.5, rng));
    for (int l = 0; l < 2; ++l) {
      const std::string p = "l" + std::to_string(l) + ".";
      gc.store.add(p + "w_ih", uniform_tensor<T>({l == 0 ? in : hidden, 4 * hidden}, -0.8, 0.8, rng));
      gc.store.add(p + "w_hh", uniform_tensor<T>({hidden, 4 * hidden}, -0.8, 0.8, rng));
      gc.store.add(p + "b", uniform_tensor<T>({4 * hidden}, -0.5, 0.5, rng));
    }
    auto r = uniform_tensor<T>({steps, n, hidden}, -1, 1, rng);
    gc.loss_and_grad = [r](BasicParamStore<T>& s) {
      s.zero_grad();
      nn::LstmWeights<T> w0{s.value("l0.w_ih"), s.value("l0.w_hh"), s.value("l0.b")};
      nn::LstmWeights<T> w1{s.value("l1.w_ih"), s.value("l1.w_hh"), s.value("l1.b")};
      nn::LstmState<T> s0{s.value("h0"), s.value("c0")};
      auto s1 = nn::LstmState<T>::zeros(s.value("h0").dim(0), s.value("h0").dim(1));
      std::vector<nn::LstmStepCache<T>> c0, c1;
      const auto y0 = nn::lstm_sequence(s.value("x"), s0, w0, &c0);
      const auto y1 = nn::lstm_sequence(y0, s1, w1, &c1);
      BasicTensor<T> dy;
      const double loss = project(y1, r, &dy);
      const auto dy0 = nn::lstm_sequence_backward(w1, c1, dy, {s.grad("l1.w_ih"), s.grad("l1.w_hh"), s.grad("l1.b")});
      nn::LstmState<T> dstate;
      s.grad("x") =
          nn::lstm_sequence_backward(w0, c0, dy0, {s.grad("l0.w_ih"), s.grad("l0.w_hh"), s.grad("l0.b")}, &dstate);
      s.grad("h0") = dstate.h;
      s.grad("c0") = dstate.c;
      return loss;
    };
    cases.push_back(std::move(gc));
  }

  for (double pos_weight : {1.0, 10.0}) {
    const Shape ls{n, 11};
    auto target = uniform_tensor<T>(ls, 0, 1, rng);
    BasicTensor<T> mask(ls);
    std::bernoulli_distribution keep(0.7);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      target[i] = target[i] > T(0.5) ? T(1) : T(0);
      mask[i] = keep(rng) ? T(1) : T(0);
    }
    {
      GradCase<T> gc;
      gc.name = "masked_weighted_bce/w" + std::to_string(static_cast<int>(pos_weight));
      gc.store.add("p", uniform_tensor<T>(ls, 0.05, 0.95, rng));
      gc.loss_and_grad = [=](BasicParamStore<T>& s) {
        s.zero_grad();
        return nn::masked_weighted_bce(s.value("p"), target, mask, pos_weight, &s.grad("p"));
      };
      cases.push_back(std::move(gc));
    }
    {
      GradCase<T> gc;
      gc.name = "masked_weighted_bce_logits/w" + std::to_string(static_cast<int>(pos_weight));
      gc.store.add("z", uniform_tensor<T>(ls, -4, 4, rng));
      gc.loss_and_grad = [=](BasicParamStore<T>& s) {
        s.zero_grad();
        return nn::masked_weighted_bce_logits(s.value("z"), target, mask, pos_weight, &s.grad("z"));
      };
      cases.push_back(std::move(gc));
    }
  }
  return cases;
}

}  // namespace vidscan::testing
