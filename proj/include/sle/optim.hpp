#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sle/dense_array.hpp"
#include "sle/errors.hpp"

namespace sle {

template <typename T>
struct BasicNamedArray {
  std::string name;
  BasicArray<T> array;
};

/// Ordered collection of named parameter tensors. Order is stable and
/// defines the order of gradients, optimizer moments and checkpoint entries.
template <typename T>
class BasicParameterSet {
 public:
  using Entry = BasicNamedArray<T>;

  void add(std::string name, BasicArray<T> array) {
    if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
    entries_.push_back(Entry{std::move(name), std::move(array)});
  }

  std::size_t size() const noexcept { return entries_.size(); }
  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  const BasicArray<T>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.array;
    return nullptr;
  }
  BasicArray<T>* find(const std::string& name) {
    for (auto& e : entries_)
      if (e.name == name) return &e.array;
    return nullptr;
  }
  const BasicArray<T>& at(const std::string& name) const {
    if (const auto* a = find(name)) return *a;
    throw ContractError("no parameter named '" + name + "'");
  }
  BasicArray<T>& at(const std::string& name) {
    if (auto* a = find(name)) return *a;
    throw ContractError("no parameter named '" + name + "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.array.size();
    return n;
  }

  /// Zero-filled arrays with the same names and shapes.
  BasicParameterSet zeros_like() const {
    BasicParameterSet out;
    for (const auto& e : entries_) out.add(e.name, BasicArray<T>(e.array.shape(), T{0}));
    return out;
  }

  template <typename U>
  BasicParameterSet<U> cast() const {
    BasicParameterSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.array.template cast<U>());
    return out;
  }

  bool same_layout(const BasicParameterSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (entries_[i].name != other[i].name || !entries_[i].array.same_shape(other[i].array)) return false;
    return true;
  }

  friend bool bit_equal(const BasicParameterSet& a, const BasicParameterSet& b) {
    if (!a.same_layout(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!bit_equal(a[i].array, b[i].array)) return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

using NamedArray = BasicNamedArray<float>;
using ParameterSet = BasicParameterSet<float>;

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.0;
  double eps = 1e-8;
};

struct OptimizerState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_parameters(const ParameterSet& params) {
    return OptimizerState{params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One AdamW update with bias correction and decoupled weight decay:
///   p <- p - lr * wd * p
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
inline void adamw_step(ParameterSet& params, const ParameterSet& grads, OptimizerState& state, const AdamWConfig& cfg) {
  if (!params.same_layout(grads)) throw ContractError("adamw_step: gradient layout does not match parameters");
  if (!params.same_layout(state.first_moment) || !params.same_layout(state.second_moment))
    throw ContractError("adamw_step: optimizer moments do not match parameters");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].array.values();
    auto g = grads[k].array.values();
    auto m = state.first_moment[k].array.values();
    auto v = state.second_moment[k].array.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      p[i] = static_cast<float>(decay * p[i] - cfg.lr * update);
    }
  }
}

struct EmaState {
  ParameterSet shadow;
  double decay = 0.9995;

  static EmaState tracking(const ParameterSet& params, double decay) {
    if (!(decay > 0.0 && decay < 1.0)) throw ContractError("ema decay must lie in (0, 1)");
    return EmaState{params, decay};
  }
};

/// shadow <- decay * shadow + (1 - decay) * params
inline void ema_update(EmaState& ema, const ParameterSet& params) {
  if (!ema.shadow.same_layout(params)) throw ContractError("ema_update: shadow layout does not match parameters");
  const double keep = ema.decay, take = 1.0 - ema.decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto s = ema.shadow[k].array.values();
    auto p = params[k].array.values();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(keep * s[i] + take * p[i]);
  }
}

}  // namespace sle
