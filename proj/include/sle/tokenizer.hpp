#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/random.hpp"

namespace sle {

/// Fixed linear encoder/decoder pair with orthonormal encode rows.
///   encode: z = scale * W x        W is [latent_dim, data_dim]
///   decode: x = W^T (z / scale)
/// Never touched by denoiser training.
class LinearTokenizer {
 public:
  LinearTokenizer(DenseArray encode_matrix, float scale) : w_(std::move(encode_matrix)), scale_(scale) {
    if (w_.rank() != 2) throw ShapeError("tokenizer matrix must be rank 2");
    if (w_.shape()[0] > w_.shape()[1]) throw ContractError("tokenizer latent dim must not exceed data dim");
    if (!(scale_ > 0.0f) || !std::isfinite(scale_)) throw ContractError("tokenizer scale must be positive");
  }

  /// Orthonormal rows from the QR factorization of a seeded Gaussian matrix.
  static LinearTokenizer random(std::size_t data_dim, std::size_t latent_dim, std::uint64_t seed) {
    if (latent_dim == 0 || latent_dim > data_dim) throw ContractError("tokenizer needs 0 < latent_dim <= data_dim");
    Rng rng = Rng::substream(seed, {0x7041u});
    Eigen::MatrixXd g(static_cast<Eigen::Index>(data_dim), static_cast<Eigen::Index>(latent_dim));
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
    DenseArray w = DenseArray::matrix(latent_dim, data_dim);
    for (std::size_t j = 0; j < latent_dim; ++j)
      for (std::size_t i = 0; i < data_dim; ++i)
        w.at(j, i) = static_cast<float>(q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    return LinearTokenizer(std::move(w), 1.0f);
  }

  static LinearTokenizer identity(std::size_t dim) {
    DenseArray w = DenseArray::matrix(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) w.at(i, i) = 1.0f;
    return LinearTokenizer(std::move(w), 1.0f);
  }

  std::size_t latent_dim() const noexcept { return w_.shape()[0]; }
  std::size_t data_dim() const noexcept { return w_.shape()[1]; }
  float scale() const noexcept { return scale_; }
  const DenseArray& matrix() const noexcept { return w_; }

  LinearTokenizer with_scale(float scale) const { return LinearTokenizer(w_, scale); }

  /// Row-wise encode of [n, data_dim] (or a single [data_dim] vector).
  DenseArray encode(const DenseArray& x) const {
    if (x.cols() != data_dim() || x.rank() > 2)
      throw ContractError("encode: expected rows of " + std::to_string(data_dim()) + " values, got " + shape_string(x.shape()));
    DenseArray z(x.rank() == 1 ? Shape{latent_dim()} : Shape{x.rows(), latent_dim()});
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto xr = x.row(r);
      auto zr = z.row(r);
      for (std::size_t j = 0; j < latent_dim(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < data_dim(); ++i) acc += static_cast<double>(w_.at(j, i)) * xr[i];
        zr[j] = static_cast<float>(scale_ * acc);
      }
    }
    return z;
  }

  DenseArray decode(const DenseArray& z) const {
    if (z.cols() != latent_dim() || z.rank() > 2)
      throw ContractError("decode: expected rows of " + std::to_string(latent_dim()) + " values, got " + shape_string(z.shape()));
    DenseArray x(z.rank() == 1 ? Shape{data_dim()} : Shape{z.rows(), data_dim()});
    const double inv = 1.0 / static_cast<double>(scale_);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      auto xr = x.row(r);
      for (std::size_t i = 0; i < data_dim(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < latent_dim(); ++j) acc += static_cast<double>(w_.at(j, i)) * zr[j];
        xr[i] = static_cast<float>(acc * inv);
      }
    }
    return x;
  }

  friend bool operator==(const LinearTokenizer& a, const LinearTokenizer& b) {
    return bit_equal(a.w_, b.w_) && a.scale_ == b.scale_;
  }

 private:
  DenseArray w_;
  float scale_;
};

/// Scale that brings pooled latents to unit mean-square: 1 / rms(latents).
/// Expects latents encoded with scale 1.
inline float calibrate_scale(const DenseArray& latents) {
  if (latents.empty()) throw ContractError("calibrate_scale: empty latent sample");
  const double ms = mean_square(latents.values());
  if (!(ms > 0.0)) throw DegenerateInputError("calibrate_scale: all latents are zero");
  return static_cast<float>(1.0 / std::sqrt(ms));
}

}  // namespace sle
