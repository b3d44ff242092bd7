#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sle/errors.hpp"

namespace sle {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Row-major dense buffer. Rank-1 arrays are treated as a single row by the
/// row-wise operations (normalization, cosine loss, affine layers).
template <typename T>
class BasicArray {
 public:
  using value_type = T;

  BasicArray() = default;

  explicit BasicArray(Shape shape, T fill = T{0}) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

  BasicArray(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_size(shape_) != values_.size())
      throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(values_.size()) +
                       " values");
  }

  static BasicArray vector(std::vector<T> values) {
    const std::size_t n = values.size();
    return BasicArray(Shape{n}, std::move(values));
  }
  static BasicArray scalar(T value) { return BasicArray(Shape{1}, std::vector<T>{value}); }
  static BasicArray matrix(std::size_t rows, std::size_t cols, T fill = T{0}) {
    return BasicArray(Shape{rows, cols}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Leading extent for rank >= 2, 1 for vectors.
  std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_.front() : (values_.empty() ? 0 : 1); }
  /// Product of every axis after the first for rank >= 2, the length for vectors.
  std::size_t cols() const noexcept {
    if (shape_.size() >= 2) return values_.size() / std::max<std::size_t>(shape_.front(), 1);
    return values_.size();
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(values_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const { return std::span<const T>(values_).subspan(r * cols(), cols()); }

  bool same_shape(const BasicArray& other) const noexcept { return shape_ == other.shape_; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  BasicArray reshaped(Shape shape) const& { return BasicArray(std::move(shape), values_); }
  BasicArray reshaped(Shape shape) && { return BasicArray(std::move(shape), std::move(values_)); }

  template <typename U>
  BasicArray<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return BasicArray<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const BasicArray& a, const BasicArray& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<T> values_;
};

using DenseArray = BasicArray<float>;

/// Same shape and the same bit pattern in every element.
template <typename T>
bool bit_equal(const BasicArray<T>& a, const BasicArray<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
double mean_square(std::span<const T> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (T v : x) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc / static_cast<double>(x.size());
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ContractError(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
}

}  // namespace sle
