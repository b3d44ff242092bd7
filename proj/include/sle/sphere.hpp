#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "sle/autodiff.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/random.hpp"

namespace sle {

/// RMSNorm stabilizer used by every spherification.
inline constexpr float kRmsEps = 1e-6f;
/// Inputs whose mean-square falls below this are rejected by spherify.
inline constexpr double kDegenerateMeanSquare = 1e-12;

/// A flattened latent with unit root-mean-square (radius sqrt(D) in L2).
class SphereLatent {
 public:
  /// Wraps values that are already normalized. Use spherify() otherwise.
  static SphereLatent adopt(DenseArray values) { return SphereLatent(std::move(values)); }

  const DenseArray& values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  double mean_square() const { return sle::mean_square(values_.values()); }

 private:
  explicit SphereLatent(DenseArray values) : values_(std::move(values)) {}
  DenseArray values_;
};

/// Row-wise spherification of a [rows, D] batch (or a single [D] vector).
inline DenseArray spherify_rows(const DenseArray& z) {
  if (z.empty()) throw ShapeError("spherify: empty input");
  for (std::size_t r = 0; r < z.rows(); ++r)
    if (!(mean_square(z.row(r)) >= kDegenerateMeanSquare))
      throw DegenerateInputError("spherify: row " + std::to_string(r) + " has mean-square below 1e-12");
  return rms_normalize(z, kRmsEps);
}

/// Flattens z and projects it onto the unit-RMS sphere.
inline SphereLatent spherify(const DenseArray& z) {
  if (z.empty()) throw ShapeError("spherify: empty input");
  const std::size_t n = z.size();
  return SphereLatent::adopt(spherify_rows(z.reshaped(Shape{n})));
}

/// spherify(v + sigma * noise).
inline SphereLatent perturb(const SphereLatent& v, float sigma, const DenseArray& noise) {
  if (noise.size() != v.dim()) throw ContractError("perturb: noise has " + std::to_string(noise.size()) + " values, latent " + std::to_string(v.dim()));
  if (!(sigma >= 0.0f)) throw ContractError("perturb: sigma must be non-negative");
  DenseArray x = v.values();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += sigma * noise[i];
  return spherify(x);
}

struct NoiseLevelPair {
  float sigma = 0.0f;
  float sigma_sub = 0.0f;
};

enum class NoiseKind { uniform_baseline, logit_normal };

struct NoiseDistConfig {
  NoiseKind kind = NoiseKind::logit_normal;
  double mu = 0.4;
  double s = 1.0;
  double sigma_lo = 0.0;
  double sigma_hi = 85.0;
  double mix_lo = 85.0;
  double mix_hi = 89.0;
  double mix_probability = 0.2;
  /// Upper end of the uniform baseline, sigma ~ U(0, sigma_max).
  double sigma_max = 85.0;

  void validate() const {
    if (!(sigma_lo >= 0.0 && sigma_lo <= sigma_hi && sigma_hi <= mix_lo && mix_lo <= mix_hi))
      throw ConfigError("noise ranges must satisfy 0 <= lo <= hi <= mix_lo <= mix_hi");
    if (!(mix_probability >= 0.0 && mix_probability <= 1.0)) throw ConfigError("noise mix probability must lie in [0, 1]");
    if (!(s > 0.0)) throw ConfigError("logit-normal scale must be positive");
    if (!(sigma_max >= 0.0)) throw ConfigError("baseline sigma_max must be non-negative");
  }
};

/// logistic(N(mu, s^2)), a draw in (0, 1).
inline double logit_normal_unit(double mu, double s, Rng& rng) {
  const double x = mu + s * rng.normal();
  return 1.0 / (1.0 + std::exp(-x));
}

/// Draws (sigma, sigma_sub) with sigma >= sigma_sub.
///
/// logit_normal: two independent logit-normal draws mapped affinely onto
/// [sigma_lo, sigma_hi]; with probability mix_probability the first draw is
/// replaced by a uniform draw from [mix_lo, mix_hi]; the larger value becomes
/// sigma. uniform_baseline: sigma ~ U(0, sigma_max), sigma_sub ~ U(0, sigma/2).
inline NoiseLevelPair sample_noise_pair(const NoiseDistConfig& cfg, Rng& rng) {
  if (cfg.kind == NoiseKind::uniform_baseline) {
    const double sigma = rng.uniform(0.0, cfg.sigma_max);
    const double sub = rng.uniform(0.0, 0.5 * sigma);
    return {static_cast<float>(sigma), static_cast<float>(sub)};
  }
  const double width = cfg.sigma_hi - cfg.sigma_lo;
  double a = cfg.sigma_lo + logit_normal_unit(cfg.mu, cfg.s, rng) * width;
  const double b = cfg.sigma_lo + logit_normal_unit(cfg.mu, cfg.s, rng) * width;
  if (rng.bernoulli(cfg.mix_probability)) a = rng.uniform(cfg.mix_lo, cfg.mix_hi);
  return {static_cast<float>(std::max(a, b)), static_cast<float>(std::min(a, b))};
}

/// Re-noising multiplier (1 - (t+1)/T)^gamma for step t of T.
inline double decay_factor(std::size_t t, std::size_t total_steps, double gamma) {
  if (t >= total_steps) throw ContractError("decay_factor: step " + std::to_string(t) + " outside [0, " + std::to_string(total_steps) + ")");
  if (!(gamma > 0.0)) throw ContractError("decay_factor: gamma must be positive");
  const double base = 1.0 - static_cast<double>(t + 1) / static_cast<double>(total_steps);
  return std::pow(base, gamma);
}

}  // namespace sle
