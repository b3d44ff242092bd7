#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sle/autodiff.hpp"
#include "sle/denoiser.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/random.hpp"
#include "sle/sphere.hpp"

namespace sle {

struct LossWeights {
  double l1_recon = 50.0;
  double l1_cons = 25.0;
  double cos_recon = 1.0;
  double cos_cons = 1.0;
  double latent_cons = 0.0;  // 0 disables the latent-consistency term
  double cls_drop_prob = 0.1;

  void validate() const {
    for (double w : {l1_recon, l1_cons, cos_recon, cos_cons, latent_cons})
      if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
    if (!(cls_drop_prob >= 0.0 && cls_drop_prob <= 1.0)) throw ConfigError("class drop probability must lie in [0, 1]");
  }
};

struct LossBreakdown {
  double recon_l1 = 0.0;
  double recon_cos = 0.0;
  double cons_l1 = 0.0;
  double cons_cos = 0.0;
  double latent_cons = 0.0;
  double total = 0.0;
};

inline double weighted_total(const LossBreakdown& b, const LossWeights& w) {
  return w.l1_recon * b.recon_l1 + w.cos_recon * b.recon_cos + w.l1_cons * b.cons_l1 + w.cos_cons * b.cons_cos +
         w.latent_cons * b.latent_cons;
}

// Direct evaluations, no graph.

/// 1 - cos(a, b) for two flattened arrays.
inline double cosine_loss(const DenseArray& a, const DenseArray& b) {
  if (a.size() != b.size()) throw ContractError("cosine_loss: size mismatch");
  if (a.empty()) throw ShapeError("cosine_loss: empty input");
  const double na = std::sqrt(kernels::dot(a.values(), a.values()));
  const double nb = std::sqrt(kernels::dot(b.values(), b.values()));
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine_loss: zero vector");
  return 1.0 - kernels::dot(a.values(), b.values()) / (na * nb);
}

inline double mean_abs_error(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a.shape(), b.shape(), "mean_abs_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  return acc / static_cast<double>(a.size());
}

/// l1_recon * mean|pred - z| + cos_recon * (1 - cos(pred, z))
inline double recon_loss(const DenseArray& pred, const DenseArray& z, const LossWeights& w) {
  require_same_shape(pred.shape(), z.shape(), "recon_loss");
  return w.l1_recon * mean_abs_error(pred, z) + w.cos_recon * cosine_loss(pred, z);
}

// Graph versions.

template <typename T>
Var recon_loss(Graph<T>& g, Var pred, Var z, const LossWeights& w) {
  require_same_shape(g.value(pred).shape(), g.value(z).shape(), "recon_loss");
  Var l1 = ops::scale(g, ops::mean_abs_error(g, pred, z), static_cast<T>(w.l1_recon));
  Var cs = ops::scale(g, ops::cosine_loss(g, pred, z), static_cast<T>(w.cos_recon));
  return ops::add(g, l1, cs);
}

/// The low-noise prediction is a fixed target: it passes through a
/// stop-gradient before either comparison.
template <typename T>
Var consistency_loss(Graph<T>& g, Var pred_big, Var pred_small, const LossWeights& w) {
  require_same_shape(g.value(pred_big).shape(), g.value(pred_small).shape(), "consistency_loss");
  Var target = ops::stop_gradient(g, pred_small);
  Var l1 = ops::scale(g, ops::mean_abs_error(g, pred_big, target), static_cast<T>(w.l1_cons));
  Var cs = ops::scale(g, ops::cosine_loss(g, pred_big, target), static_cast<T>(w.cos_cons));
  return ops::add(g, l1, cs);
}

/// Per-example randomness of one training batch, drawn in a fixed order:
/// noise pair, label-drop coin, eps (shared by both noise levels), then the
/// fresh eps used by the latent-consistency re-noising. The last one is drawn
/// even when that term is disabled so every loss variant sees the same stream.
struct BatchNoise {
  std::vector<NoiseLevelPair> pairs;
  std::vector<bool> dropped;
  DenseArray eps;
  DenseArray eps_latent;
};

inline BatchNoise draw_batch_noise(std::size_t batch, std::size_t dim, const NoiseDistConfig& noise, const LossWeights& w,
                                   Rng& rng) {
  BatchNoise out{{}, {}, DenseArray::matrix(batch, dim), DenseArray::matrix(batch, dim)};
  out.pairs.reserve(batch);
  out.dropped.reserve(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    out.pairs.push_back(sample_noise_pair(noise, rng));
    out.dropped.push_back(rng.bernoulli(w.cls_drop_prob));
    for (float& e : out.eps.row(r)) e = static_cast<float>(rng.normal());
    for (float& e : out.eps_latent.row(r)) e = static_cast<float>(rng.normal());
  }
  return out;
}

struct LossOptions {
  /// false replaces the RMS projection by the identity (ablation).
  bool spherify = true;
  /// Builds the latent-consistency branch even when its weight is 0.
  bool force_latent_path = false;
  /// When set, the stop-gradient target is recomputed from these parameters
  /// instead of reusing the reconstruction pass. Used by gradient checks.
  std::span<const Var> target_params;
};

template <typename T>
struct LossNodes {
  Var total;
  Var recon_l1;
  Var recon_cos;
  Var cons_l1;
  Var cons_cos;
  Var latent_cons;  // invalid when the branch is not built
  std::size_t forward_passes = 0;
};

namespace detail {

template <typename T>
BasicArray<T> project_rows(const BasicArray<T>& x, bool spherify) {
  if (!spherify) return x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (!(mean_square(x.row(r)) >= kDegenerateMeanSquare))
      throw DegenerateInputError("spherify: row " + std::to_string(r) + " has mean-square below 1e-12");
  return rms_normalize(x, static_cast<T>(kRmsEps));
}

template <typename T>
BasicArray<T> noisy_rows(const BasicArray<T>& z, const DenseArray& eps, const std::vector<NoiseLevelPair>& pairs, bool use_sub) {
  BasicArray<T> out = z;
  const std::size_t cols = z.cols();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const T s = static_cast<T>(use_sub ? pairs[r].sigma_sub : pairs[r].sigma);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += s * static_cast<T>(eps[r * cols + c]);
  }
  return out;
}

}  // namespace detail

/// Builds the weighted training objective for a batch of clean latents
/// z [B, D]:
///   v_noisy = F(z + sigma_sub * eps),  v_NOISY = F(z + sigma * eps)
///   recon   = l1_recon |G(v_noisy) - z| + cos_recon cos(G(v_noisy), z)
///   cons    = l1_cons |G(v_NOISY) - sg(G(v_noisy))| + cos_cons cos(...)
///   latent  = cos(G(F(F(G(v_NOISY)) + sigma * eps')), G(v_NOISY))
/// Dropped labels are replaced by the null label for every pass of that example.
template <typename T>
LossNodes<T> build_training_loss(Graph<T>& g, const std::vector<Var>& params, const DenoiserArch& arch,
                                 const BasicArray<T>& z, std::span<const Label> labels, const BatchNoise& noise,
                                 const LossWeights& w, const LossOptions& opt = {}) {
  if (z.empty() || z.rank() != 2) throw ContractError("training loss needs a non-empty [batch, dim] array");
  const std::size_t batch = z.rows();
  if (labels.size() != batch || noise.pairs.size() != batch || noise.eps.shape() != z.shape())
    throw ContractError("training loss: batch inputs disagree in size");

  std::vector<Label> effective(labels.begin(), labels.end());
  for (std::size_t r = 0; r < batch; ++r)
    if (noise.dropped[r]) effective[r] = Label::null(arch.classes);

  LossNodes<T> out;
  Var v_small = g.constant(detail::project_rows(detail::noisy_rows(z, noise.eps, noise.pairs, true), opt.spherify));
  Var v_big = g.constant(detail::project_rows(detail::noisy_rows(z, noise.eps, noise.pairs, false), opt.spherify));
  Var target = g.constant(z);

  Var pred_small = denoise(g, params, arch, v_small, effective);
  Var pred_big = denoise(g, params, arch, v_big, effective);
  out.forward_passes = 2;

  out.recon_l1 = ops::mean_abs_error(g, pred_small, target);
  out.recon_cos = ops::cosine_loss(g, pred_small, target);
  Var fixed = ops::stop_gradient(g, pred_small);
  if (!opt.target_params.empty()) {
    fixed = ops::stop_gradient(g, denoise(g, std::vector<Var>(opt.target_params.begin(), opt.target_params.end()), arch, v_small, effective));
    out.forward_passes += 1;
  }
  out.cons_l1 = ops::mean_abs_error(g, pred_big, fixed);
  out.cons_cos = ops::cosine_loss(g, pred_big, fixed);

  Var total = ops::add(g, ops::scale(g, out.recon_l1, static_cast<T>(w.l1_recon)),
                       ops::scale(g, out.recon_cos, static_cast<T>(w.cos_recon)));
  total = ops::add(g, total, ops::scale(g, out.cons_l1, static_cast<T>(w.l1_cons)));
  total = ops::add(g, total, ops::scale(g, out.cons_cos, static_cast<T>(w.cos_cons)));

  if (w.latent_cons > 0.0 || opt.force_latent_path) {
    Var v_refined = opt.spherify ? ops::rms_normalize(g, pred_big, static_cast<T>(kRmsEps)) : pred_big;
    BasicArray<T> kick(z.shape());
    const std::size_t cols = z.cols();
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        kick[r * cols + c] = static_cast<T>(noise.pairs[r].sigma) * static_cast<T>(noise.eps_latent[r * cols + c]);
    Var renoisy = ops::add(g, v_refined, g.constant(std::move(kick)));
    if (opt.spherify) renoisy = ops::rms_normalize(g, renoisy, static_cast<T>(kRmsEps));
    Var rerefined = denoise(g, params, arch, renoisy, effective);
    out.forward_passes += 1;
    out.latent_cons = ops::cosine_loss(g, rerefined, pred_big);
    total = ops::add(g, total, ops::scale(g, out.latent_cons, static_cast<T>(w.latent_cons)));
  }
  out.total = total;
  return out;
}

template <typename T>
LossBreakdown breakdown_of(const Graph<T>& g, const LossNodes<T>& nodes, const LossWeights& w) {
  LossBreakdown b;
  b.recon_l1 = g.value(nodes.recon_l1)[0];
  b.recon_cos = g.value(nodes.recon_cos)[0];
  b.cons_l1 = g.value(nodes.cons_l1)[0];
  b.cons_cos = g.value(nodes.cons_cos)[0];
  b.latent_cons = nodes.latent_cons.valid() ? static_cast<double>(g.value(nodes.latent_cons)[0]) : 0.0;
  b.total = weighted_total(b, w);
  return b;
}

/// Loss values for one batch (no parameter update). Draws the batch noise
/// from rng exactly as a training step would.
inline LossBreakdown training_losses(const DenseArray& z, std::span<const Label> labels, const DenoiserParameters& params,
                                     const NoiseDistConfig& noise_cfg, const LossWeights& w, Rng& rng,
                                     const LossOptions& opt = {}) {
  if (z.empty()) throw ContractError("training_losses: empty batch");
  BatchNoise noise = draw_batch_noise(z.rows(), z.cols(), noise_cfg, w, rng);
  Graph<float> g;
  auto vars = bind_parameters(g, params.tensors(), false);
  auto nodes = build_training_loss(g, vars, params.arch(), z, labels, noise, w, opt);
  return breakdown_of(g, nodes, w);
}

/// Re-noising self-consistency of the denoiser for one spherical latent:
///   z1 = G(v), v1 = F(z1), v2 = F(v1 + sigma * eps) with fresh eps,
///   returns 1 - cos(G(v2), z1).
inline double latent_consistency_loss(const SphereLatent& v_noisy, float sigma, Label y, const DenoiserParameters& params,
                                      Rng& rng) {
  const DenseArray refined = denoise(v_noisy, y, params);
  const SphereLatent v_refined = spherify(refined);
  DenseArray eps(Shape{v_refined.dim()});
  for (float& e : eps.values()) e = static_cast<float>(rng.normal());
  const SphereLatent renoisy = perturb(v_refined, sigma, eps);
  return cosine_loss(denoise(renoisy, y, params), refined);
}

}  // namespace sle
