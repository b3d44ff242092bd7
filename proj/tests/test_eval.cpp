#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace sle;

namespace {

DenseArray gaussian(std::size_t n, std::size_t d, double shift, Rng& rng) {
  DenseArray x = DenseArray::matrix(n, d);
  for (auto& v : x.values()) v = static_cast<float>(shift + rng.normal());
  return x;
}

GaussianSummary summary(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return GaussianSummary{std::move(mean), std::move(cov)}; }

}  // namespace

TEST(Frechet, IdenticalSummariesGiveZero) {
  Rng rng(1);
  auto g = fit_gaussian(gaussian(200, 5, 0.3, rng));
  EXPECT_NEAR(frechet_distance(g, g), 0.0, 1e-9);
}

TEST(Frechet, MeanShiftOnly) {
  Eigen::VectorXd mb = Eigen::VectorXd::Zero(4);
  mb(0) = 3.0;
  auto a = summary(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4));
  auto b = summary(mb, Eigen::MatrixXd::Identity(4, 4));
  EXPECT_NEAR(frechet_distance(a, b), 9.0, 1e-12);
}

TEST(Frechet, DiagonalClosedForm) {
  // Commuting covariances: sum (sqrt(a_i) - sqrt(b_i))^2.
  Eigen::VectorXd da(3), db(3);
  da << 1.0, 4.0, 0.25;
  db << 9.0, 1.0, 0.25;
  auto a = summary(Eigen::VectorXd::Zero(3), da.asDiagonal());
  auto b = summary(Eigen::VectorXd::Zero(3), db.asDiagonal());
  EXPECT_NEAR(frechet_distance(a, b), 4.0 + 1.0 + 0.0, 1e-12);
}

TEST(Frechet, SymmetricInArguments) {
  Rng rng(2);
  auto a = fit_gaussian(gaussian(300, 6, 0.0, rng));
  DenseArray xb = gaussian(300, 6, 0.5, rng);
  for (std::size_t r = 0; r < xb.rows(); ++r) xb.at(r, 1) = 2.0f * xb.at(r, 0) + 0.1f * xb.at(r, 1);
  auto b = fit_gaussian(xb);
  EXPECT_NEAR(frechet_distance(a, b), frechet_distance(b, a), 1e-9);
  EXPECT_GT(frechet_distance(a, b), 0.0);
}

TEST(Frechet, LargeSamplesFromOneDistribution) {
  Rng r1(3), r2(4);
  auto a = fit_gaussian(gaussian(50000, 8, 0.0, r1));
  auto b = fit_gaussian(gaussian(50000, 8, 0.0, r2));
  EXPECT_LT(frechet_distance(a, b), 0.05);
}

TEST(Frechet, NonPsdCovarianceIsNumericError) {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(2, 2) = -1.0;
  auto a = summary(Eigen::VectorXd::Zero(3), bad);
  auto b = summary(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_THROW(frechet_distance(a, b), NumericError);
  EXPECT_THROW(frechet_distance(b, a), NumericError);
  // Tiny negative round-off is clipped, not rejected.
  Eigen::MatrixXd nearly = Eigen::MatrixXd::Identity(3, 3);
  nearly(2, 2) = -1e-10;
  EXPECT_NO_THROW(frechet_distance(summary(Eigen::VectorXd::Zero(3), nearly), b));
}

TEST(Frechet, UnbiasedCovariance) {
  DenseArray x(Shape{2, 1}, std::vector<float>{1, 3});
  auto g = fit_gaussian(x);
  EXPECT_DOUBLE_EQ(g.mean(0), 2.0);
  EXPECT_DOUBLE_EQ(g.cov(0, 0), 2.0);
}

TEST(Mmd, SameMultisetIsNotPositive) {
  Rng rng(5);
  auto a = gaussian(300, 3, 0.0, rng);
  const double h = median_bandwidth(a, a);
  EXPECT_LE(mmd_rbf(a, a, h), 1e-12);
}

TEST(Mmd, BiasedEstimateOracle) {
  // Recompute the unbiased estimate from the kernel matrix directly.
  Rng rng(6);
  auto a = gaussian(40, 2, 0.0, rng), b = gaussian(30, 2, 1.0, rng);
  const double h = 1.3;
  auto k = [&](std::span<const float> x, std::span<const float> y) {
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = static_cast<double>(x[i]) - static_cast<double>(y[i]);
      d += e * e;
    }
    return std::exp(-d / (2 * h * h));
  };
  const DenseArray& ca = a;
  const DenseArray& cb = b;
  double xx = 0, yy = 0, xy = 0;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      if (i != j) xx += k(ca.row(i), ca.row(j));
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j)
      if (i != j) yy += k(cb.row(i), cb.row(j));
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 30; ++j) xy += k(ca.row(i), cb.row(j));
  const double want = xx / (40.0 * 39.0) + yy / (30.0 * 29.0) - 2.0 * xy / (40.0 * 30.0);
  EXPECT_NEAR(mmd_rbf(a, b, h), want, 1e-12);
}

TEST(Mmd, NullDistributionNearZero) {
  Rng r1(7), r2(8);
  auto a = gaussian(5000, 4, 0.0, r1), b = gaussian(5000, 4, 0.0, r2);
  EXPECT_LT(std::abs(mmd_rbf(a, b, median_bandwidth(a, b))), 0.01);
}

TEST(Mmd, FarSeparatedDistributions) {
  Rng r1(9), r2(10);
  auto a = gaussian(5000, 4, 0.0, r1), b = gaussian(5000, 4, 5.0, r2);
  EXPECT_GT(mmd_rbf(a, b, median_bandwidth(a, b)), 0.5);
}

TEST(Mmd, Preconditions) {
  Rng rng(11);
  auto a = gaussian(1, 2, 0.0, rng), b = gaussian(5, 2, 0.0, rng);
  EXPECT_THROW(mmd_rbf(a, b, 1.0), ContractError);
  EXPECT_THROW(mmd_rbf(b, b, 0.0), ContractError);
}

TEST(ClassAccuracy, LabelBlindGeneratorScoresOneOverK) {
  MixtureDatasetConfig c;
  c.seed = 3;
  c.n_per_class = 10;
  auto ds = make_mixture(c);
  // Rows cycle through the class means while labels are class-major.
  auto labels = balanced_labels(64, 8);
  DenseArray x = DenseArray::matrix(64, c.data_dim);
  for (std::size_t r = 0; r < 64; ++r) {
    auto m = std::as_const(ds.means).row(r % 8);
    std::copy(m.begin(), m.end(), x.row(r).begin());
  }
  EXPECT_DOUBLE_EQ(class_accuracy(x, labels, ds.means), 1.0 / 8.0);
}

TEST(ClassAccuracy, DataScoresNearOne) {
  MixtureDatasetConfig c;
  c.seed = 3;
  c.n_per_class = 100;
  auto ds = make_mixture(c);
  EXPECT_GT(class_accuracy(ds.x, ds.labels, ds.means), 0.99);
}

TEST(Evaluate, ReferenceAgainstItself) {
  MixtureDatasetConfig c;
  c.seed = 3;
  c.n_per_class = 100;
  auto ds = make_mixture(c);
  auto m = score_samples(ds.x, ds.labels, ds);
  EXPECT_LT(m.toy_fid, 1e-6);
  EXPECT_LE(m.mmd2, 1e-9);
}

TEST(Evaluate, BalancedAndDeterministic) {
  auto cfg = sle::testing::small_config();
  auto data = prepare_data(cfg);
  auto ck = fresh_checkpoint(cfg, data);
  auto a = evaluate_checkpoint(ck, data, 2, 30, 1.0);
  auto b = evaluate_checkpoint(ck, data, 2, 30, 1.0);
  EXPECT_EQ(a.toy_fid, b.toy_fid);
  EXPECT_EQ(a.mmd2, b.mmd2);
  EXPECT_THROW(evaluate_checkpoint(ck, data, 2, 31, 1.0), ContractError);
}
