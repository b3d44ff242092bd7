#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sle/autodiff.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/kernels.hpp"
#include "sle/optim.hpp"
#include "sle/random.hpp"
#include "sle/sphere.hpp"

namespace sle {

/// Class label; the value equal to the class count is the null label used
/// for unconditional passes.
struct Label {
  std::size_t value = 0;

  static Label null(std::size_t classes) noexcept { return Label{classes}; }
  bool is_null(std::size_t classes) const noexcept { return value == classes; }
  friend bool operator==(Label, Label) = default;
};

struct DenoiserArch {
  std::size_t latent_dim = 16;
  std::size_t hidden = 256;
  std::size_t blocks = 4;
  std::size_t classes = 8;

  void validate() const {
    if (latent_dim == 0 || hidden == 0 || classes == 0) throw ConfigError("denoiser dimensions must be positive");
  }
  friend bool operator==(const DenoiserArch&, const DenoiserArch&) = default;
};

struct ParameterSpec {
  std::string name;
  Shape shape;
};

/// Parameter names and shapes in canonical order:
/// input projection, class embedding (classes + 1 rows), residual blocks,
/// output projection.
inline std::vector<ParameterSpec> denoiser_layout(const DenoiserArch& a) {
  std::vector<ParameterSpec> out;
  out.push_back({"input.weight", {a.latent_dim, a.hidden}});
  out.push_back({"input.bias", {a.hidden}});
  out.push_back({"embed", {a.classes + 1, a.hidden}});
  for (std::size_t b = 0; b < a.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    out.push_back({p + "fc1.weight", {a.hidden, a.hidden}});
    out.push_back({p + "fc1.bias", {a.hidden}});
    out.push_back({p + "fc2.weight", {a.hidden, a.hidden}});
    out.push_back({p + "fc2.bias", {a.hidden}});
  }
  out.push_back({"output.weight", {a.hidden, a.latent_dim}});
  out.push_back({"output.bias", {a.latent_dim}});
  return out;
}

class DenoiserParameters {
 public:
  DenoiserParameters(DenoiserArch arch, ParameterSet tensors) : arch_(arch), tensors_(std::move(tensors)) {
    arch_.validate();
    const auto layout = denoiser_layout(arch_);
    if (layout.size() != tensors_.size()) throw ContractError("denoiser parameter count does not match architecture");
    for (std::size_t i = 0; i < layout.size(); ++i)
      if (tensors_[i].name != layout[i].name || tensors_[i].array.shape() != layout[i].shape)
        throw ContractError("denoiser parameter '" + tensors_[i].name + "' does not match architecture");
  }

  static DenoiserParameters zeros(const DenoiserArch& arch) {
    arch.validate();
    ParameterSet set;
    for (auto& spec : denoiser_layout(arch)) set.add(spec.name, DenseArray(spec.shape));
    return DenoiserParameters(arch, std::move(set));
  }

  /// Weight matrices and the embedding table ~ N(0, 0.02^2); biases zero.
  static DenoiserParameters initialize(const DenoiserArch& arch, std::uint64_t seed) {
    DenoiserParameters p = zeros(arch);
    Rng rng = Rng::substream(seed, {0xD3u});
    for (auto& e : p.tensors_) {
      if (e.array.rank() != 2) continue;
      for (auto& v : e.array.values()) v = static_cast<float>(0.02 * rng.normal());
    }
    return p;
  }

  const DenoiserArch& arch() const noexcept { return arch_; }
  const ParameterSet& tensors() const noexcept { return tensors_; }
  ParameterSet& tensors() noexcept { return tensors_; }
  DenseArray& embedding() { return tensors_.at("embed"); }
  const DenseArray& embedding() const { return tensors_.at("embed"); }

 private:
  DenoiserArch arch_;
  ParameterSet tensors_;
};

template <typename T>
std::vector<Var> bind_parameters(Graph<T>& g, const BasicParameterSet<T>& params, bool trainable) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& e : params) vars.push_back(trainable ? g.leaf(e.array) : g.constant(e.array));
  return vars;
}

inline void validate_labels(std::span<const Label> labels, std::size_t classes) {
  for (Label y : labels)
    if (y.value > classes)
      throw ContractError("label " + std::to_string(y.value) + " outside [0, " + std::to_string(classes) + "]");
}

/// G(v, y): predicts the clean latent from spherical latents v [rows, D].
/// There is deliberately no noise-level or timestep input.
///   h = W_in v + b_in + embed[y]
///   h = h + fc2(silu(fc1(h)))      per block
///   out = W_out h + b_out
template <typename T>
Var denoise(Graph<T>& g, const std::vector<Var>& params, const DenoiserArch& arch, Var v, std::span<const Label> labels) {
  const auto& vv = g.value(v);
  if (vv.rank() != 2 || vv.cols() != arch.latent_dim)
    throw ShapeError("denoise: expected [rows, " + std::to_string(arch.latent_dim) + "], got " + shape_string(vv.shape()));
  if (labels.size() != vv.rows()) throw ContractError("denoise: one label per row required");
  validate_labels(labels, arch.classes);
  if (params.size() != 5 + 4 * arch.blocks) throw ContractError("denoise: parameter binding does not match architecture");
  std::vector<std::size_t> index(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) index[i] = labels[i].value;

  Var h = ops::affine(g, v, params[0], params[1]);
  h = ops::add(g, h, ops::gather_rows(g, params[2], std::move(index)));
  for (std::size_t b = 0; b < arch.blocks; ++b) {
    const std::size_t k = 3 + 4 * b;
    Var u = ops::silu(g, ops::affine(g, h, params[k], params[k + 1]));
    h = ops::add(g, h, ops::affine(g, u, params[k + 2], params[k + 3]));
  }
  const std::size_t k = 3 + 4 * arch.blocks;
  return ops::affine(g, h, params[k], params[k + 1]);
}

/// Inference-only batch forward, no graph. Same kernels and operation order
/// as the graph version, so results are bit-identical to it.
inline DenseArray denoise(const DenoiserParameters& params, const DenseArray& v, std::span<const Label> labels) {
  const DenoiserArch& a = params.arch();
  const DenseArray in = v.rank() == 1 ? v.reshaped(Shape{1, v.size()}) : v;
  if (in.rank() != 2 || in.cols() != a.latent_dim)
    throw ShapeError("denoise: expected [rows, " + std::to_string(a.latent_dim) + "], got " + shape_string(v.shape()));
  const std::size_t rows = in.rows(), hid = a.hidden;
  if (labels.size() != rows) throw ContractError("denoise: one label per row required");
  validate_labels(labels, a.classes);
  const ParameterSet& p = params.tensors();

  std::vector<float> h(rows * hid), u(rows * hid), t(rows * hid);
  kernels::affine_forward(in.data(), rows, a.latent_dim, p[0].array.data(), hid, p[1].array.data(), h.data());
  const DenseArray& embed = p[2].array;
  for (std::size_t r = 0; r < rows; ++r) {
    auto e = embed.row(labels[r].value);
    for (std::size_t j = 0; j < hid; ++j) h[r * hid + j] += e[j];
  }
  for (std::size_t b = 0; b < a.blocks; ++b) {
    const std::size_t k = 3 + 4 * b;
    kernels::affine_forward(h.data(), rows, hid, p[k].array.data(), hid, p[k + 1].array.data(), u.data());
    for (float& x : u) x = kernels::silu(x);
    kernels::affine_forward(u.data(), rows, hid, p[k + 2].array.data(), hid, p[k + 3].array.data(), t.data());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += t[i];
  }
  const std::size_t k = 3 + 4 * a.blocks;
  DenseArray out = DenseArray::matrix(rows, a.latent_dim);
  kernels::affine_forward(h.data(), rows, hid, p[k].array.data(), a.latent_dim, p[k + 1].array.data(), out.data());
  return out;
}

inline DenseArray denoise(const SphereLatent& v, Label y, const DenoiserParameters& params) {
  const Label labels[1] = {y};
  return denoise(params, v.values(), labels).reshaped(Shape{params.arch().latent_dim});
}

/// Classifier-free guidance: uncond + omega * (cond - uncond). The endpoints
/// omega = 1 and omega = 0 return cond and uncond exactly.
inline DenseArray cfg_combine(const DenseArray& uncond, const DenseArray& cond, float omega) {
  require_same_shape(uncond.shape(), cond.shape(), "cfg_combine");
  if (omega == 1.0f) return cond;
  if (omega == 0.0f) return uncond;
  DenseArray out(uncond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = uncond[i] + omega * (cond[i] - uncond[i]);
  return out;
}

}  // namespace sle
