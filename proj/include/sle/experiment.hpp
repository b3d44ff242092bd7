#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sle/checkpoint.hpp"
#include "sle/config.hpp"
#include "sle/data.hpp"
#include "sle/eval.hpp"
#include "sle/sampler.hpp"
#include "sle/tokenizer.hpp"
#include "sle/trainer.hpp"

namespace sle {

/// Dataset, calibrated tokenizer and latents for a config; a pure function
/// of the data and tokenizer settings.
struct PreparedData {
  LabeledDataset dataset;
  LinearTokenizer tokenizer;
  LatentDataset latents;
};

inline PreparedData prepare_data(const RunConfig& cfg) {
  LabeledDataset ds = make_mixture(cfg.data);
  LinearTokenizer tok =
      calibrated_tokenizer(ds, LinearTokenizer::random(cfg.data.data_dim, cfg.latent_dim, cfg.tokenizer_seed));
  LatentDataset lat = precompute_latents(ds, tok);
  return PreparedData{std::move(ds), std::move(tok), std::move(lat)};
}

inline Checkpoint fresh_checkpoint(const RunConfig& cfg, const PreparedData& data) {
  return Checkpoint{cfg, TrainState::initial(cfg.arch(), cfg.training()), data.tokenizer};
}

/// Trains (or resumes) ck to cfg.train.epochs. The hook runs after every epoch.
inline std::vector<EpochRecord> run_training(Checkpoint& ck, const PreparedData& data, const EpochHook& hook = {}) {
  return train(data.latents, ck.state, ck.config.training(), hook);
}

/// Class-balanced metrics at the given step count (other sampler settings
/// from the config).
inline MetricRecord evaluate_checkpoint(const Checkpoint& ck, const PreparedData& data, std::size_t steps,
                                        std::size_t n_samples, double omega) {
  SamplerConfig s = ck.config.sampling();
  s.steps = steps;
  s.omega = omega;
  return evaluate(ck.sampling_parameters(), ck.tokenizer, s, data.dataset, n_samples);
}

struct AblationArm {
  std::string axis;
  std::string name;
  RunConfig config;
};

/// One arm per ablated setting; everything else (including seeds) is the
/// reference config. The step axis reuses the reference model.
inline std::vector<AblationArm> ablation_arms(const RunConfig& base) {
  std::vector<AblationArm> arms;
  auto add = [&](std::string axis, std::string name, auto edit) {
    RunConfig c = base;
    edit(c);
    c.run_id = base.run_id + "-" + name;
    arms.push_back({std::move(axis), std::move(name), std::move(c)});
  };
  add("reference", "reference", [](RunConfig&) {});
  add("noise", "uniform", [](RunConfig& c) {
    c.train.noise.kind = NoiseKind::uniform_baseline;
    c.train.noise.sigma_max = c.train.noise.sigma_hi;
  });
  add("noise", "logit_normal_neg", [](RunConfig& c) { c.train.noise.mu = -c.train.noise.mu; });
  add("loss", "recon_only", [](RunConfig& c) {
    c.train.weights.l1_cons = 0.0;
    c.train.weights.cos_cons = 0.0;
  });
  add("loss", "recon_cons_latent", [](RunConfig& c) { c.train.weights.latent_cons = 1.0; });
  add("spherify", "no_spherify", [](RunConfig& c) { c.spherify = false; });
  return arms;
}

}  // namespace sle
