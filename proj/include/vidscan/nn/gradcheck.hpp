#pragma once

#include <functional>
#include <string>

#include "vidscan/nn/params.hpp"

namespace vidscan::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // elements sitting on a kink, see grad_check
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
}

// Compares analytic gradients against central finite differences.
//
// `loss_and_grad` must zero the store's gradients, evaluate the loss and
// accumulate gradients into the store. When `max_per_tensor` is non-zero, a
// seeded random subset of that many elements is checked per tensor.
//
// With `skip_kinks`, elements whose one-sided differences disagree by more
// than 0.1% are counted in `skipped` instead of compared: the loss is not
// differentiable there (a ReLU6 edge or a max-pool tie inside the step).
template <class T>
GradCheckResult grad_check(BasicParamStore<T>& store, const std::function<double(BasicParamStore<T>&)>& loss_and_grad,
                           double eps = 1e-3, std::size_t max_per_tensor = 0, std::uint64_t seed = 0,
                           bool skip_kinks = false) {
  const double f0 = loss_and_grad(store);
  std::vector<BasicTensor<T>> analytic;
  for (const auto& p : store.params()) analytic.push_back(p.grad);

  GradCheckResult result;
  Rng rng(seed);
  for (std::size_t pi = 0; pi < store.params().size(); ++pi) {
    const std::size_t n = store.params()[pi].value.size();
    std::vector<std::size_t> idx;
    if (max_per_tensor == 0 || n <= max_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t k = 0; k < max_per_tensor; ++k) idx.push_back(pick(rng));
    }
    for (std::size_t i : idx) {
      T& slot = store.params()[pi].value[i];
      const T original = slot;
      slot = static_cast<T>(original + eps);
      const double plus_step = static_cast<double>(slot) - static_cast<double>(original);
      const double f_plus = loss_and_grad(store);
      slot = static_cast<T>(original - eps);
      const double minus_step = static_cast<double>(original) - static_cast<double>(slot);
      const double f_minus = loss_and_grad(store);
      slot = original;
      if (skip_kinks) {
        const double right = (f_plus - f0) / plus_step, left = (f0 - f_minus) / minus_step;
        if (std::abs(right - left) > 1e-3 * (std::abs(right) + std::abs(left)) + 1e-8) {
          ++result.skipped;
          continue;
        }
      }
      const double numeric = (f_plus - f_minus) / (plus_step + minus_step);
      const double err = relative_error(static_cast<double>(analytic[pi][i]), numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = store.params()[pi].name;
        result.worst_index = i;
      }
    }
  }
  loss_and_grad(store);
  return result;
}

}  // namespace vidscan::nn
