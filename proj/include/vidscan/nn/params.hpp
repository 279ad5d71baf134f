#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vidscan/nn/tensor.hpp"

namespace vidscan::nn {

using Rng = std::mt19937_64;

template <class T>
struct Param {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> m;  // Adam first moment
  BasicTensor<T> v;  // Adam second moment
};

// Insertion-ordered map of named parameters with gradient and optimizer
// buffers of matching shape.
template <class T>
class BasicParamStore {
 public:
  Param<T>& add(const std::string& name, BasicTensor<T> value) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    const Shape shape = value.shape();
    index_.emplace(name, params_.size());
    params_.push_back({name, std::move(value), BasicTensor<T>(shape), BasicTensor<T>(shape), BasicTensor<T>(shape)});
    return params_.back();
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Param<T>& at(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second];
  }
  const Param<T>& at(const std::string& name) const { return const_cast<BasicParamStore*>(this)->at(name); }

  BasicTensor<T>& value(const std::string& name) { return at(name).value; }
  const BasicTensor<T>& value(const std::string& name) const { return at(name).value; }
  BasicTensor<T>& grad(const std::string& name) { return at(name).grad; }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::size_t tensor_count() const { return params_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(T(0));
  }

  std::int64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::int64_t n) { adam_steps_ = n; }

  // Parameter values only; optimizer state is not compared.
  bool same_values(const BasicParamStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) return false;
    return true;
  }

 private:
  std::vector<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t adam_steps_ = 0;
};

using ParamStore = BasicParamStore<float>;

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter.
template <class T>
void adam_step(BasicParamStore<T>& store, const AdamOptions& opt = {}) {
  store.set_adam_steps(store.adam_steps() + 1);
  const double t = static_cast<double>(store.adam_steps());
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto& p : store.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double m = opt.beta1 * p.m[i] + (1.0 - opt.beta1) * g;
      const double v = opt.beta2 * p.v[i] + (1.0 - opt.beta2) * g * g;
      p.m[i] = static_cast<T>(m);
      p.v[i] = static_cast<T>(v);
      p.value[i] -= static_cast<T>(opt.lr * (m / c1) / (std::sqrt(v / c2) + opt.eps));
    }
  }
}

// He-uniform: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <class T>
BasicTensor<T> he_uniform(Shape shape, int fan_in, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  const double limit = std::sqrt(6.0 / std::max(fan_in, 1));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
BasicTensor<T> uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

// ---------------------------------------------------------------------------
// PSNW weights file (little-endian):
//   "PSNW" | u32 version=1 | u32 count |
//   per tensor: u32 name_len | name | u8 dtype (0=f32) | u8 rank | u32 dims[rank] | f32 data

enum class WeightsErrorKind { Io, BadMagic, VersionMismatch, Truncated, UnsupportedDtype, NonFinite, Duplicate };

class WeightsError : public std::runtime_error {
 public:
  WeightsError(WeightsErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  WeightsErrorKind kind() const { return kind_; }

 private:
  WeightsErrorKind kind_;
};

inline constexpr std::uint32_t kWeightsVersion = 1;

std::vector<std::uint8_t> encode_weights(const ParamStore& store);
ParamStore decode_weights(const std::vector<std::uint8_t>& bytes);
void save_weights(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_weights(const std::filesystem::path& path);

}  // namespace vidscan::nn
