#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "sle/denoiser.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/parallel.hpp"
#include "sle/random.hpp"
#include "sle/sphere.hpp"
#include "sle/tokenizer.hpp"

namespace sle {

struct SamplerConfig {
  std::size_t steps = 4;
  double sigma_max = 24.0;
  double omega = 1.0;
  double gamma = 0.5;
  /// Draw a new eps at every step instead of reusing the first one.
  bool fresh_eps = false;
  std::uint64_t seed = 0;
  /// false replaces F by the identity (ablation; must match training).
  bool spherify = true;

  void validate() const {
    if (steps == 0) throw ConfigError("sampler steps must be >= 1");
    if (!(sigma_max >= 0.0)) throw ConfigError("sampler sigma_max must be non-negative");
    if (!(gamma > 0.0)) throw ConfigError("sampler gamma must be positive");
    if (!std::isfinite(omega)) throw ConfigError("sampler omega must be finite");
  }
};

struct SamplerCounters {
  std::size_t denoiser_calls = 0;  // per-sample evaluations of G
  std::size_t decode_calls = 0;
  std::size_t encode_calls = 0;  // stays 0: sampling never re-encodes
  std::size_t samples = 0;

  SamplerCounters& operator+=(const SamplerCounters& o) {
    denoiser_calls += o.denoiser_calls;
    decode_calls += o.decode_calls;
    encode_calls += o.encode_calls;
    samples += o.samples;
    return *this;
  }
};

struct SamplerStepTrace {
  double noise_scale = 0.0;  // sigma_max * r
  double v_mean_square = 0.0;
  double v_refined_mean_square = 0.0;
};

namespace detail {

inline DenseArray sampler_project(const DenseArray& z, bool spherify, std::size_t step) {
  if (!spherify) return z;
  for (std::size_t r = 0; r < z.rows(); ++r)
    if (!(mean_square(z.row(r)) >= kDegenerateMeanSquare))
      throw SamplingError("degenerate latent (mean-square below 1e-12) in row " + std::to_string(r), step);
  return rms_normalize(z, kRmsEps);
}

inline void fill_normal(std::span<float> out, Rng& rng) {
  for (float& v : out) v = static_cast<float>(rng.normal());
}

/// Algorithm loop over a block of rows. rngs[r] supplies row r's draws in
/// the order z0, eps, then one eps per later step when fresh_eps is set.
inline DenseArray sample_latents(std::span<const Label> labels, std::span<Rng> rngs, const DenoiserParameters& params,
                                 const SamplerConfig& cfg, SamplerCounters* counters,
                                 std::vector<SamplerStepTrace>* trace) {
  const DenoiserArch& arch = params.arch();
  const std::size_t rows = labels.size(), dim = arch.latent_dim;
  const bool guided = cfg.omega != 1.0;
  validate_labels(labels, arch.classes);
  if (guided)
    for (Label y : labels)
      if (y.is_null(arch.classes)) throw ContractError("sampling with omega != 1 needs a class label, got the null label");

  DenseArray z = DenseArray::matrix(rows, dim);
  DenseArray eps = DenseArray::matrix(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    fill_normal(z.row(r), rngs[r]);
    fill_normal(eps.row(r), rngs[r]);
  }
  const std::vector<Label> null_labels(rows, Label::null(arch.classes));

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    if (cfg.fresh_eps && t > 0)
      for (std::size_t r = 0; r < rows; ++r) fill_normal(eps.row(r), rngs[r]);
    const DenseArray v = sampler_project(z, cfg.spherify, t);
    DenseArray guided_z = denoise(params, v, labels);
    if (guided) guided_z = cfg_combine(denoise(params, v, null_labels), guided_z, static_cast<float>(cfg.omega));
    if (counters) counters->denoiser_calls += rows * (guided ? 2 : 1);
    const double scale = cfg.sigma_max * decay_factor(t, cfg.steps, cfg.gamma);
    const float k = static_cast<float>(scale);
    const DenseArray v_refined = sampler_project(guided_z, cfg.spherify, t);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = v_refined[i] + eps[i] * k;
    if (trace) trace->push_back({scale, mean_square(v.values()), mean_square(v_refined.values())});
  }
  return z;
}

}  // namespace detail

/// Final latent of the sampling loop for one label, before decoding.
inline DenseArray sample_latent(Label y, const DenoiserParameters& params, const SamplerConfig& cfg, Rng& rng,
                                SamplerCounters* counters = nullptr, std::vector<SamplerStepTrace>* trace = nullptr) {
  cfg.validate();
  const Label labels[1] = {y};
  return detail::sample_latents(labels, std::span<Rng>(&rng, 1), params, cfg, counters, trace)
      .reshaped(Shape{params.arch().latent_dim});
}

/// Iterative latent sampling with classifier-free guidance:
///   z ~ N(0, I), eps ~ N(0, I)
///   for t in 0..T-1:
///     v = F(z);  z_g = G(v, null) + omega (G(v, y) - G(v, null))
///     r = (1 - (t+1)/T)^gamma;  z = F(z_g) + eps * sigma_max * r
///   return decode(z)
/// With omega = 1 the unconditional pass is skipped.
inline DenseArray sample_one(Label y, const DenoiserParameters& params, const LinearTokenizer& tok, const SamplerConfig& cfg,
                             Rng& rng, SamplerCounters* counters = nullptr,
                             std::vector<SamplerStepTrace>* trace = nullptr) {
  if (tok.latent_dim() != params.arch().latent_dim) throw ContractError("sample: tokenizer and denoiser latent dims differ");
  const DenseArray z = sample_latent(y, params, cfg, rng, counters, trace);
  if (counters) {
    counters->decode_calls += 1;
    counters->samples += 1;
  }
  return tok.decode(z);
}

/// Per-sample stream keyed by (seed, label, occurrence of that label so far).
inline std::vector<Rng> sample_streams(std::span<const Label> labels, std::uint64_t seed) {
  std::vector<Rng> out;
  out.reserve(labels.size());
  std::vector<std::uint64_t> seen;
  for (Label y : labels) {
    if (seen.size() <= y.value) seen.resize(y.value + 1, 0);
    out.push_back(Rng::substream(seed, {y.value, seen[y.value]++}));
  }
  return out;
}

/// Samples one data point per label; rows of the result follow labels.
inline DenseArray sample_batch(std::span<const Label> labels, const DenoiserParameters& params, const LinearTokenizer& tok,
                               const SamplerConfig& cfg, SamplerCounters* counters = nullptr) {
  cfg.validate();
  if (labels.empty()) throw ContractError("sample_batch: no labels");
  if (tok.latent_dim() != params.arch().latent_dim) throw ContractError("sample: tokenizer and denoiser latent dims differ");
  validate_labels(labels, params.arch().classes);
  std::vector<Rng> rngs = sample_streams(labels, cfg.seed);
  DenseArray out = DenseArray::matrix(labels.size(), tok.data_dim());
  std::mutex mu;
  constexpr std::size_t kChunk = 256;
  parallel_chunks(labels.size(), kChunk, [&](std::size_t begin, std::size_t end) {
    SamplerCounters local;
    const DenseArray z = detail::sample_latents(labels.subspan(begin, end - begin),
                                                std::span<Rng>(rngs).subspan(begin, end - begin), params, cfg, &local,
                                                nullptr);
    const DenseArray x = tok.decode(z);
    local.decode_calls += end - begin;
    local.samples += end - begin;
    std::copy(x.values().begin(), x.values().end(), out.data() + begin * out.cols());
    if (counters) {
      std::lock_guard lock(mu);
      *counters += local;
    }
  });
  return out;
}

/// n / K labels per class, class-major.
inline std::vector<Label> balanced_labels(std::size_t n, std::size_t classes) {
  if (classes == 0 || n % classes != 0)
    throw ContractError("balanced sampling needs n divisible by the class count (" + std::to_string(n) + " vs " +
                        std::to_string(classes) + ")");
  std::vector<Label> out;
  out.reserve(n);
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t i = 0; i < n / classes; ++i) out.push_back(Label{k});
  return out;
}

}  // namespace sle
