#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sle/denoiser.hpp"
#include "sle/errors.hpp"
#include "sle/tokenizer.hpp"

namespace sle {

/// Costs are in whatever unit the caller supplies (GFLOPs for the published
/// constants, plain FLOPs for the toy model).
struct ComponentCost {
  std::string name;
  double params = 0.0;
  double flops_per_forward = 0.0;
};

struct CostSubtotal {
  std::string name;
  double passes = 0.0;
  double flops = 0.0;
};

struct FlopReport {
  std::size_t steps = 0;
  bool cfg_enabled = false;
  std::vector<CostSubtotal> subtotals;
  double total = 0.0;
};

namespace detail {

inline void require_steps(std::size_t steps) {
  if (steps == 0) throw ContractError("cost model needs steps >= 1");
}

inline FlopReport finish(FlopReport r) {
  r.total = 0.0;
  for (const auto& s : r.subtotals) r.total += s.flops;
  return r;
}

}  // namespace detail

/// T (x2 with guidance) denoiser passes and one final decode.
inline FlopReport flops_latent_pipeline(std::size_t steps, bool cfg_enabled, const ComponentCost& denoiser,
                                        const ComponentCost& decoder) {
  detail::require_steps(steps);
  const double passes = static_cast<double>(steps) * (cfg_enabled ? 2.0 : 1.0);
  FlopReport r{steps, cfg_enabled, {}, 0.0};
  r.subtotals.push_back({denoiser.name, passes, passes * denoiser.flops_per_forward});
  r.subtotals.push_back({decoder.name, 1.0, decoder.flops_per_forward});
  return detail::finish(std::move(r));
}

/// Pixel-space loop: T decoder and T - 1 encoder passes, all doubled with guidance.
inline FlopReport flops_pixel_loop_pipeline(std::size_t steps, bool cfg_enabled, const ComponentCost& encoder,
                                            const ComponentCost& decoder) {
  detail::require_steps(steps);
  const double mult = cfg_enabled ? 2.0 : 1.0;
  const double dec = mult * static_cast<double>(steps);
  const double enc = mult * static_cast<double>(steps - 1);
  FlopReport r{steps, cfg_enabled, {}, 0.0};
  r.subtotals.push_back({decoder.name, dec, dec * decoder.flops_per_forward});
  r.subtotals.push_back({encoder.name, enc, enc * encoder.flops_per_forward});
  return detail::finish(std::move(r));
}

/// Affine layer in -> out: 2 * in * out multiply-adds plus out bias adds.
inline double affine_flops(std::size_t in, std::size_t out) {
  return 2.0 * static_cast<double>(in) * static_cast<double>(out) + static_cast<double>(out);
}

/// Counts affine layers only; SiLU, residual adds and the embedding lookup
/// are not counted.
inline ComponentCost flops_toy_model(const DenoiserArch& a) {
  ComponentCost c{"toy denoiser", 0.0, 0.0};
  for (const auto& spec : denoiser_layout(a)) c.params += static_cast<double>(shape_size(spec.shape));
  c.flops_per_forward = affine_flops(a.latent_dim, a.hidden) +
                        static_cast<double>(a.blocks) * 2.0 * affine_flops(a.hidden, a.hidden) +
                        affine_flops(a.hidden, a.latent_dim);
  return c;
}

/// Decoder matrix product plus the per-output scale division.
inline ComponentCost flops_toy_decoder(const LinearTokenizer& tok) {
  return {"toy decoder", static_cast<double>(tok.matrix().size()), affine_flops(tok.latent_dim(), tok.data_dim())};
}

inline ComponentCost flops_toy_encoder(const LinearTokenizer& tok) {
  return {"toy encoder", static_cast<double>(tok.matrix().size()), affine_flops(tok.data_dim(), tok.latent_dim())};
}

/// Published per-forward component costs (GFLOPs) and derived constants.
namespace paper_costs {

// ImageNet-scale components.
inline const ComponentCost sphere_encoder_encoder{"Sphere Encoder encoder", 0.0, 918.0};
inline const ComponentCost sphere_encoder_decoder{"Sphere Encoder decoder", 0.0, 977.0};
inline const ComponentCost ours_denoiser{"Ours denoiser", 0.0, 230.0};
inline const ComponentCost ours_decoder{"Ours decoder", 0.0, 213.0};

inline constexpr double pixel_loop_t4_cfg = 13326.0;
inline constexpr double latent_t6_cfg = 2969.0;

// Small-dataset columns, steps 2 / 4 / 6.
inline constexpr std::size_t small_steps[3] = {2, 4, 6};
inline constexpr double small_ours[3] = {302.0, 390.0, 478.0};
inline constexpr double small_sphere_encoder[3] = {1965.0, 4554.0, 7144.0};

/// Denoiser cost from the two-step total with the shared decoder: (302 - 213) / 2.
inline ComponentCost small_ours_denoiser() {
  return {"Ours denoiser (small)", 0.0, (small_ours[0] - ours_decoder.flops_per_forward) / 2.0};
}

/// Decoder d and encoder e from 2d + e = 1965 and 4d + 3e = 4554.
inline std::pair<ComponentCost, ComponentCost> small_sphere_encoder_parts() {
  const double a = small_sphere_encoder[0], b = small_sphere_encoder[1];
  const double e = (b - 2.0 * a) / (3.0 - 2.0);
  const double d = (a - e) / 2.0;
  return {ComponentCost{"Sphere Encoder decoder (small)", 0.0, d}, ComponentCost{"Sphere Encoder encoder (small)", 0.0, e}};
}

}  // namespace paper_costs

inline double relative_error(double value, double reference) {
  return std::abs(value - reference) / std::abs(reference);
}

/// Ratio of whole-pipeline totals, pixel loop over latent, at equal steps.
inline double advantage_ratio(std::size_t steps, bool cfg_enabled, const ComponentCost& encoder, const ComponentCost& pixel_decoder,
                              const ComponentCost& denoiser, const ComponentCost& latent_decoder) {
  return flops_pixel_loop_pipeline(steps, cfg_enabled, encoder, pixel_decoder).total /
         flops_latent_pipeline(steps, cfg_enabled, denoiser, latent_decoder).total;
}

}  // namespace sle
