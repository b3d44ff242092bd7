#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

// Row-wise numeric kernels shared by the autodiff graph and the inference
// paths. Every kernel processes rows independently with a fixed loop order,
// so a row's result does not depend on how many rows are in the batch.

namespace sle::kernels {

/// y[r,:] = bias + x[r,:] * w, with w stored row-major as [in, out].
template <typename T>
void affine_forward(const T* x, std::size_t rows, std::size_t in, const T* w, std::size_t out, const T* bias,
                    T* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* yr = y + r * out;
    const T* xr = x + r * in;
    if (bias) {
      for (std::size_t j = 0; j < out; ++j) yr[j] = bias[j];
    } else {
      for (std::size_t j = 0; j < out; ++j) yr[j] = T{0};
    }
    for (std::size_t i = 0; i < in; ++i) {
      const T a = xr[i];
      const T* wi = w + i * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += a * wi[j];
    }
  }
}

/// Accumulates dx += dy * w^T, dw += x^T * dy, dbias += sum_r dy. Any output
/// pointer may be null when that gradient is not needed.
template <typename T>
void affine_backward(const T* x, std::size_t rows, std::size_t in, const T* w, std::size_t out, const T* dy, T* dx,
                     T* dw, T* dbias) {
  if (dx) {
    std::vector<T> wt(in * out);
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t j = 0; j < out; ++j) wt[j * in + i] = w[i * out + j];
    for (std::size_t r = 0; r < rows; ++r) {
      T* dxr = dx + r * in;
      const T* dyr = dy + r * out;
      for (std::size_t j = 0; j < out; ++j) {
        const T g = dyr[j];
        const T* wtj = wt.data() + j * in;
        for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wtj[i];
      }
    }
  }
  if (dw) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = x + r * in;
      const T* dyr = dy + r * out;
      for (std::size_t i = 0; i < in; ++i) {
        const T a = xr[i];
        T* dwi = dw + i * out;
        for (std::size_t j = 0; j < out; ++j) dwi[j] += a * dyr[j];
      }
    }
  }
  if (dbias) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* dyr = dy + r * out;
      for (std::size_t j = 0; j < out; ++j) dbias[j] += dyr[j];
    }
  }
}

template <typename T>
T silu(T x) {
  return x / (T{1} + std::exp(-x));
}

/// d/dx silu(x) = s(x) * (1 + x * (1 - s(x))) with s the logistic function.
template <typename T>
T silu_derivative(T x) {
  const T s = T{1} / (T{1} + std::exp(-x));
  return s * (T{1} + x * (T{1} - s));
}

/// Scales each row to unit mean-square: y = x / sqrt(mean(x^2) + eps).
/// Writes the per-row scale factor to inv_rms when provided. Returns false
/// when some row has mean(x^2) + eps == 0 (its output is then left at zero).
template <typename T>
bool rms_normalize_rows(const T* x, std::size_t rows, std::size_t cols, T eps, T* y, T* inv_rms) {
  bool ok = true;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(xr[c]) * static_cast<double>(xr[c]);
    const double ms = acc / static_cast<double>(cols) + static_cast<double>(eps);
    T* yr = y + r * cols;
    if (!(ms > 0.0)) {
      ok = false;
      for (std::size_t c = 0; c < cols; ++c) yr[c] = T{0};
      if (inv_rms) inv_rms[r] = T{0};
      continue;
    }
    // Scale in double; a float scale alone is off by up to 1.2e-7 in mean-square.
    const double s = 1.0 / std::sqrt(ms);
    for (std::size_t c = 0; c < cols; ++c) yr[c] = static_cast<T>(static_cast<double>(xr[c]) * s);
    if (inv_rms) inv_rms[r] = static_cast<T>(s);
  }
  return ok;
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace sle::kernels
