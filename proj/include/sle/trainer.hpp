#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sle/autodiff.hpp"
#include "sle/data.hpp"
#include "sle/denoiser.hpp"
#include "sle/errors.hpp"
#include "sle/objectives.hpp"
#include "sle/optim.hpp"
#include "sle/random.hpp"
#include "sle/sphere.hpp"

namespace sle {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 256;
  AdamWConfig adam;
  double ema_decay = 0.9995;
  NoiseDistConfig noise;
  LossWeights weights;
  LossOptions options;
  std::uint64_t seed = 0;
  /// Checkpoint every N epochs (0 = final only).
  std::size_t checkpoint_every = 0;

  void validate() const {
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("train.ema_decay must lie in (0, 1)");
    if (!(adam.lr >= 0.0)) throw ConfigError("train.lr must be non-negative");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
      throw ConfigError("train betas must lie in [0, 1)");
    if (!(adam.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
    noise.validate();
    weights.validate();
  }
};

/// Everything that evolves during training. Together with the dataset and
/// the config it determines the rest of the run.
struct TrainState {
  DenoiserParameters params;
  OptimizerState opt;
  EmaState ema;
  Rng rng;
  std::uint64_t epoch = 0;

  static TrainState initial(const DenoiserArch& arch, const TrainConfig& cfg) {
    DenoiserParameters p = DenoiserParameters::initialize(arch, Rng::substream(cfg.seed, {0x1417u}).engine()());
    OptimizerState opt = OptimizerState::for_parameters(p.tensors());
    EmaState ema = EmaState::tracking(p.tensors(), cfg.ema_decay);
    return TrainState{std::move(p), std::move(opt), std::move(ema), Rng::substream(cfg.seed, {0x7A1Eu}), 0};
  }

  DenoiserParameters ema_parameters() const { return DenoiserParameters(params.arch(), ema.shadow); }
};

/// Loss gradients with respect to every parameter, plus the breakdown.
template <typename T>
std::pair<LossBreakdown, BasicParameterSet<T>> loss_and_gradients(const BasicParameterSet<T>& params, const DenoiserArch& arch,
                                                                  const BasicArray<T>& z, std::span<const Label> labels,
                                                                  const BatchNoise& noise, const LossWeights& w,
                                                                  const LossOptions& opt) {
  Graph<T> g;
  auto vars = bind_parameters(g, params, true);
  auto nodes = build_training_loss(g, vars, arch, z, labels, noise, w, opt);
  g.backward(nodes.total);
  BasicParameterSet<T> grads;
  for (std::size_t i = 0; i < params.size(); ++i) grads.add(params[i].name, g.grad(vars[i]));
  return {breakdown_of(g, nodes, w), std::move(grads)};
}

/// One optimizer step on a batch: loss, backward, AdamW, EMA.
inline LossBreakdown train_step(const DenseArray& z, std::span<const Label> labels, TrainState& state, const TrainConfig& cfg) {
  if (z.empty() || labels.empty()) throw ContractError("train_step: empty batch");
  const BatchNoise noise = draw_batch_noise(z.rows(), z.cols(), cfg.noise, cfg.weights, state.rng);
  auto [loss, grads] =
      loss_and_gradients(state.params.tensors(), state.params.arch(), z, labels, noise, cfg.weights, cfg.options);
  if (!std::isfinite(loss.total)) throw DivergenceError("non-finite training loss", state.opt.step + 1);
  for (const auto& gr : grads)
    if (!gr.array.all_finite()) throw DivergenceError("non-finite gradient for '" + gr.name + "'", state.opt.step + 1);
  adamw_step(state.params.tensors(), grads, state.opt, cfg.adam);
  ema_update(state.ema, state.params.tensors());
  return loss;
}

/// Seeded epoch order; depends only on (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::substream(seed, {0x5F1Fu, epoch});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.engine()() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

/// One pass over the dataset; returns the mean breakdown over its steps.
inline LossBreakdown train_epoch(const LatentDataset& data, TrainState& state, const TrainConfig& cfg) {
  const std::size_t n = data.size();
  const std::size_t dim = data.z.cols();
  const auto order = epoch_order(n, cfg.seed, state.epoch);
  LossBreakdown mean;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t b = std::min(cfg.batch_size, n - start);
    DenseArray z = DenseArray::matrix(b, dim);
    std::vector<Label> labels(b);
    for (std::size_t r = 0; r < b; ++r) {
      const std::size_t src = order[start + r];
      auto from = data.z.row(src);
      std::copy(from.begin(), from.end(), z.row(r).begin());
      labels[r] = data.labels[src];
    }
    const LossBreakdown l = train_step(z, labels, state, cfg);
    mean.recon_l1 += l.recon_l1;
    mean.recon_cos += l.recon_cos;
    mean.cons_l1 += l.cons_l1;
    mean.cons_cos += l.cons_cos;
    mean.latent_cons += l.latent_cons;
    ++steps;
  }
  const double inv = steps ? 1.0 / static_cast<double>(steps) : 0.0;
  for (double* v : {&mean.recon_l1, &mean.recon_cos, &mean.cons_l1, &mean.cons_cos, &mean.latent_cons}) *v *= inv;
  mean.total = weighted_total(mean, cfg.weights);
  state.epoch += 1;
  return mean;
}

struct EpochRecord {
  std::uint64_t epoch = 0;  // 1-based count of completed epochs
  LossBreakdown loss;
};

/// Called after each epoch; a checkpoint writer hangs off this.
using EpochHook = std::function<void(const TrainState&, const EpochRecord&)>;

/// Runs epochs until state.epoch == cfg.epochs. Starting from a restored
/// state resumes the run where it stopped.
inline std::vector<EpochRecord> train(const LatentDataset& data, TrainState& state, const TrainConfig& cfg,
                                      const EpochHook& hook = {}) {
  cfg.validate();
  if (data.size() == 0) throw ContractError("train: empty dataset");
  if (data.classes != state.params.arch().classes)
    throw ContractError("train: dataset has " + std::to_string(data.classes) + " classes, denoiser expects " +
                        std::to_string(state.params.arch().classes));
  if (data.z.cols() != state.params.arch().latent_dim) throw ContractError("train: latent dim does not match denoiser");
  std::vector<EpochRecord> log;
  while (state.epoch < cfg.epochs) {
    EpochRecord rec;
    rec.loss = train_epoch(data, state, cfg);
    rec.epoch = state.epoch;
    log.push_back(rec);
    if (hook) hook(state, rec);
  }
  return log;
}

}  // namespace sle
