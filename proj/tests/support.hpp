#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include <unistd.h>

#include "sle/sle.hpp"

namespace sle::testing {

using ArrayD = BasicArray<double>;

inline ArrayD random_array(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  ArrayD a(std::move(shape));
  for (auto& v : a.values()) v = rng.uniform(lo, hi);
  return a;
}

inline DenseArray random_floats(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  return random_array(std::move(shape), rng, lo, hi).cast<float>();
}

/// Evaluates root = build(graph, leaves) in float, backpropagates, and
/// compares every leaf gradient with central differences of the double
/// evaluation. Returns |g_float - g_fd| / |g_fd| over all leaves (norm-wise;
/// 0 when both vanish).
///
/// A build may take a third argument: constants holding the unperturbed
/// inputs. Graphs with stop_gradient use it on the double side so the
/// differences see the stopped branch frozen, which is what the analytic
/// gradient describes.
template <typename T, typename Build>
Var call_build(Build& build, Graph<T>& g, const std::vector<Var>& leaves, const std::vector<ArrayD>& base) {
  if constexpr (std::is_invocable_v<Build&, Graph<T>&, const std::vector<Var>&, const std::vector<Var>&>) {
    std::vector<Var> frozen;
    for (const auto& b : base) frozen.push_back(g.constant(b.template cast<T>()));
    return build(g, leaves, frozen);
  } else {
    return build(g, leaves);
  }
}

template <typename Build>
double float_gradient_error(Build build, const std::vector<ArrayD>& inputs, double h = 1e-3) {
  Graph<float> gf;
  std::vector<Var> vf;
  for (const auto& in : inputs) vf.push_back(gf.leaf(in.template cast<float>()));
  const Var root = call_build(build, gf, vf, inputs);
  gf.backward(root);

  auto eval = [&](std::size_t k, std::size_t i, double delta) {
    Graph<double> gd;
    std::vector<Var> vd;
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      ArrayD a = inputs[j];
      if (j == k) a[i] += delta;
      vd.push_back(gd.leaf(std::move(a)));
    }
    return gd.value(call_build(build, gd, vd, inputs))[0];
  };

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& g = gf.grad(vf[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double fd = (eval(k, i, h) - eval(k, i, -h)) / (2.0 * h);
      const double d = static_cast<double>(g[i]) - fd;
      num += d * d;
      den += fd * fd;
    }
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

/// Same comparison with a double-precision analytic gradient.
template <typename Build>
double double_gradient_error(Build build, const std::vector<ArrayD>& inputs, double h = 1e-5) {
  Graph<double> g;
  std::vector<Var> v;
  for (const auto& in : inputs) v.push_back(g.leaf(in));
  g.backward(build(g, v));
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        Graph<double> gd;
        std::vector<Var> vd;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          ArrayD a = inputs[j];
          if (j == k) a[i] += delta;
          vd.push_back(gd.leaf(std::move(a)));
        }
        return gd.value(build(gd, vd))[0];
      };
      const double fd = (eval(h) - eval(-h)) / (2.0 * h);
      const double d = g.grad(v[k])[i] - fd;
      num += d * d;
      den += fd * fd;
    }
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

/// Small architecture that keeps finite-difference sweeps cheap.
inline DenoiserArch tiny_arch() { return DenoiserArch{4, 6, 1, 3}; }

/// Independent re-implementation of the noise-pair recipe straight from
/// its description, sharing no code with sample_noise_pair.
inline double oracle_sigma(std::mt19937_64& eng, double mu, double s, double lo, double hi, double mlo, double mhi, double p) {
  std::normal_distribution<double> n(mu, s);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double a = lo + (hi - lo) * logistic(n(eng));
  const double b = lo + (hi - lo) * logistic(n(eng));
  if (u(eng) < p) a = mlo + (mhi - mlo) * u(eng);
  return std::max(a, b);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("sle_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Small but complete run config for fast end-to-end tests.
inline RunConfig small_config(const std::string& id = "small") {
  RunConfig c;
  c.run_id = id;
  c.data.classes = 3;
  c.data.data_dim = 6;
  c.data.n_per_class = 20;
  c.data.seed = 5;
  c.latent_dim = 6;
  c.tokenizer_seed = 2;
  c.hidden = 8;
  c.blocks = 1;
  c.train.epochs = 3;
  c.train.batch_size = 16;
  c.train.adam.lr = 1e-3;
  c.train.seed = 9;
  c.train.noise.sigma_hi = 0.85;
  c.train.noise.mix_lo = 0.85;
  c.train.noise.mix_hi = 0.89;
  c.train.noise.sigma_max = 0.85;
  c.sampler.sigma_max = 4.8;
  c.eval_samples = 30;
  return c;
}

}  // namespace sle::testing
