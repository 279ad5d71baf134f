#pragma once

#include "vidscan/nn/kernels.hpp"

namespace vidscan::nn {

inline constexpr double kProbClamp = 1e-7;

// Mean over unmasked entries of -[w t log p + (1 - t) log(1 - p)].
// An all-masked input has loss 0 and zero gradient.
template <class T>
double masked_weighted_bce(const BasicTensor<T>& pred, const BasicTensor<T>& target, const BasicTensor<T>& mask,
                           double pos_weight, BasicTensor<T>* dpred = nullptr) {
  detail::require(pred.shape() == target.shape() && pred.shape() == mask.shape(), "masked_weighted_bce: shapes differ");
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) count += mask[i] != T(0);
  if (dpred != nullptr) *dpred = BasicTensor<T>(pred.shape());
  if (count == 0) return 0.0;
  double sum = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i] == T(0)) continue;
    const double raw = static_cast<double>(pred[i]);
    const double p = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
    const double t = target[i];
    sum += -(pos_weight * t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    if (dpred != nullptr && raw == p) (*dpred)[i] = static_cast<T>(inv * (-pos_weight * t / p + (1.0 - t) / (1.0 - p)));
  }
  return sum * inv;
}

// Same loss evaluated on logits (p = sigmoid(z)) with a numerically stable
// gradient: dL/dz = (1 - t) p - w t (1 - p). Used by the trainers.
template <class T>
double masked_weighted_bce_logits(const BasicTensor<T>& logits, const BasicTensor<T>& target,
                                  const BasicTensor<T>& mask, double pos_weight, BasicTensor<T>* dlogits = nullptr) {
  detail::require(logits.shape() == target.shape() && logits.shape() == mask.shape(),
                  "masked_weighted_bce_logits: shapes differ");
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) count += mask[i] != T(0);
  if (dlogits != nullptr) *dlogits = BasicTensor<T>(logits.shape());
  if (count == 0) return 0.0;
  double sum = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i] == T(0)) continue;
    const double z = logits[i];
    const double t = target[i];
    // log(sigmoid(z)) and log(1 - sigmoid(z)) without overflow
    const double log_p = -(std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))));
    const double log_q = -(std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))));
    const double lp = std::max(log_p, std::log(kProbClamp));
    const double lq = std::max(log_q, std::log(kProbClamp));
    sum += -(pos_weight * t * lp + (1.0 - t) * lq);
    if (dlogits != nullptr) {
      const double p = sigmoid(z);
      (*dlogits)[i] = static_cast<T>(inv * ((1.0 - t) * p - pos_weight * t * (1.0 - p)));
    }
  }
  return sum * inv;
}

}  // namespace vidscan::nn
