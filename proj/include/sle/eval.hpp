#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sle/data.hpp"
#include "sle/denoiser.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/sampler.hpp"
#include "sle/tokenizer.hpp"

namespace sle {

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Sample mean and unbiased covariance of the rows of x.
inline GaussianSummary fit_gaussian(const DenseArray& x) {
  if (x.rank() != 2 || x.rows() < 2) throw ContractError("fit_gaussian: need at least 2 rows");
  const auto n = static_cast<Eigen::Index>(x.rows()), d = static_cast<Eigen::Index>(x.cols());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = x[static_cast<std::size_t>(r * d + c)];
  GaussianSummary g;
  g.mean = m.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.rowwise() - g.mean.transpose();
  g.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return g;
}

namespace detail {

/// Symmetric PSD square root; eigenvalues below -1e-8 are a numeric error,
/// the rest are clipped at 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a, const char* what) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigendecomposition failed");
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw NumericError(std::string(what) + ": matrix is not positive semidefinite (eigenvalue " +
                       std::to_string(es.eigenvalues().minCoeff()) + ")");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The cross term uses
/// tr((S_a S_b)^(1/2)) = tr((R S_b R)^(1/2)) with R = S_a^(1/2), which keeps
/// the product symmetric.
inline double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim() || a.dim() == 0) throw ContractError("frechet_distance: dimension mismatch");
  const Eigen::MatrixXd ra = detail::psd_sqrt(a.cov, "frechet_distance (first covariance)");
  detail::psd_sqrt(b.cov, "frechet_distance (second covariance)");
  const Eigen::MatrixXd cross = detail::psd_sqrt(ra * b.cov * ra, "frechet_distance (cross term)");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  return mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
}

namespace detail {

inline double sq_dist(std::span<const float> a, std::span<const float> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = static_cast<double>(a[i]) - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace detail

/// Median pairwise distance over the pooled sets (at most max_points rows of
/// each, taken with a fixed stride).
inline double median_bandwidth(const DenseArray& a, const DenseArray& b, std::size_t max_points = 1000) {
  std::vector<std::span<const float>> pts;
  for (const DenseArray* s : {&a, &b}) {
    const std::size_t stride = std::max<std::size_t>(1, s->rows() / max_points);
    for (std::size_t r = 0; r < s->rows(); r += stride) pts.push_back(s->row(r));
  }
  std::vector<double> d;
  d.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d.push_back(std::sqrt(detail::sq_dist(pts[i], pts[j])));
  if (d.empty()) throw ContractError("median_bandwidth: need at least 2 points");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (!(*mid > 0.0)) throw DegenerateInputError("median_bandwidth: all points coincide");
  return *mid;
}

/// Unbiased squared MMD with k(x, y) = exp(-|x - y|^2 / (2 h^2)).
inline double mmd_rbf(const DenseArray& a, const DenseArray& b, double bandwidth) {
  if (a.rows() < 2 || b.rows() < 2) throw ContractError("mmd_rbf: each set needs at least 2 samples");
  if (a.cols() != b.cols()) throw ContractError("mmd_rbf: dimension mismatch");
  if (!(bandwidth > 0.0)) throw ContractError("mmd_rbf: bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto within = [&](const DenseArray& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = i + 1; j < s.rows(); ++j) acc += std::exp(-detail::sq_dist(s.row(i), s.row(j)) * inv);
    const double n = static_cast<double>(s.rows());
    return 2.0 * acc / (n * (n - 1.0));
  };
  double cross = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) cross += std::exp(-detail::sq_dist(a.row(i), b.row(j)) * inv);
  cross /= static_cast<double>(a.rows()) * static_cast<double>(b.rows());
  return within(a) + within(b) - 2.0 * cross;
}

/// Fraction of rows whose nearest class mean is their label.
inline double class_accuracy(const DenseArray& x, std::span<const Label> labels, const DenseArray& means) {
  if (x.rows() != labels.size() || labels.empty()) throw ContractError("class_accuracy: one label per row required");
  std::size_t hit = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) hit += nearest_mean(x.row(r), means) == labels[r].value;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

struct MetricRecord {
  double toy_fid = 0.0;
  double mmd2 = 0.0;
  double class_acc = 0.0;
};

/// Metrics of a generated set against the reference data. MMD uses at most
/// mmd_points rows from each set (fixed stride) to bound the quadratic cost.
inline MetricRecord score_samples(const DenseArray& generated, std::span<const Label> labels, const LabeledDataset& reference,
                                  std::size_t mmd_points = 1000) {
  MetricRecord m;
  m.toy_fid = frechet_distance(fit_gaussian(generated), fit_gaussian(reference.x));
  auto thin = [&](const DenseArray& s) {
    const std::size_t stride = std::max<std::size_t>(1, s.rows() / mmd_points);
    DenseArray out = DenseArray::matrix((s.rows() + stride - 1) / stride, s.cols());
    for (std::size_t r = 0, o = 0; r < s.rows(); r += stride, ++o) std::copy(s.row(r).begin(), s.row(r).end(), out.row(o).begin());
    return out;
  };
  const DenseArray ga = thin(generated), rb = thin(reference.x);
  m.mmd2 = mmd_rbf(ga, rb, median_bandwidth(ga, rb));
  m.class_acc = class_accuracy(generated, labels, reference.means);
  return m;
}

/// Class-balanced generation (n / K per class) scored against the reference set.
inline MetricRecord evaluate(const DenoiserParameters& params, const LinearTokenizer& tok, const SamplerConfig& cfg,
                             const LabeledDataset& reference, std::size_t n_samples) {
  const auto labels = balanced_labels(n_samples, params.arch().classes);
  const DenseArray x = sample_batch(labels, params, tok, cfg);
  return score_samples(x, labels, reference);
}

}  // namespace sle
