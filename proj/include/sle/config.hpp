#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "sle/cost.hpp"
#include "sle/data.hpp"
#include "sle/denoiser.hpp"
#include "sle/errors.hpp"
#include "sle/objectives.hpp"
#include "sle/sampler.hpp"
#include "sle/sphere.hpp"
#include "sle/trainer.hpp"

namespace sle {

struct CostTable {
  ComponentCost pixel_encoder = paper_costs::sphere_encoder_encoder;
  ComponentCost pixel_decoder = paper_costs::sphere_encoder_decoder;
  ComponentCost denoiser = paper_costs::ours_denoiser;
  ComponentCost latent_decoder = paper_costs::ours_decoder;
};

/// Everything a run needs, read from a flat `key = value` file.
struct RunConfig {
  std::string run_id;
  std::string output_dir = "runs";

  MixtureDatasetConfig data;
  std::size_t latent_dim = 16;
  std::uint64_t tokenizer_seed = 0;
  std::size_t hidden = 256;
  std::size_t blocks = 4;
  /// Shared by training and sampling; false is the "without spherify" ablation.
  bool spherify = true;

  TrainConfig train;
  SamplerConfig sampler;
  bool sample_with_ema = true;

  std::size_t eval_samples = 5000;
  std::vector<std::size_t> eval_steps{2, 4, 8};
  std::vector<std::uint64_t> ablate_seeds{0, 1};

  CostTable cost;

  DenoiserArch arch() const { return DenoiserArch{latent_dim, hidden, blocks, data.classes}; }

  TrainConfig training() const {
    TrainConfig t = train;
    t.options.spherify = spherify;
    return t;
  }

  SamplerConfig sampling() const {
    SamplerConfig s = sampler;
    s.spherify = spherify;
    return s;
  }

  void validate() const {
    if (run_id.empty()) throw ConfigError("run.id must not be empty");
    for (char c : run_id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
        throw ConfigError("run.id '" + run_id + "' must use only letters, digits, '-', '_' and '.'");
    if (run_id == "." || run_id == "..") throw ConfigError("run.id must not be '.' or '..'");
    data.validate();
    if (latent_dim == 0 || latent_dim > data.data_dim) throw ConfigError("tokenizer.latent_dim must lie in [1, data.dim]");
    arch().validate();
    train.validate();
    sampler.validate();
    if (eval_samples == 0 || eval_samples % data.classes != 0)
      throw ConfigError("eval.samples must be a positive multiple of data.classes");
    for (std::size_t s : eval_steps)
      if (s == 0) throw ConfigError("eval.steps entries must be >= 1");
    if (ablate_seeds.empty()) throw ConfigError("ablate.seeds must not be empty");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Parsers throw std::invalid_argument; the caller adds key and line.
inline void parse_value(const std::string& s, double& out) {
  const char* b = s.c_str();
  char* end = nullptr;
  out = std::strtod(b, &end);
  if (end == b || *end != '\0' || !std::isfinite(out)) throw std::invalid_argument("expected a finite number");
}

inline void parse_value(const std::string& s, std::uint64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("expected a non-negative integer");
}

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "config fields assume a 64-bit size_t");

inline void parse_value(const std::string& s, bool& out) {
  if (s == "true" || s == "1") out = true;
  else if (s == "false" || s == "0") out = false;
  else throw std::invalid_argument("expected true or false");
}

inline void parse_value(const std::string& s, std::string& out) { out = s; }

inline void parse_value(const std::string& s, NoiseKind& out) {
  if (s == "logit_normal") out = NoiseKind::logit_normal;
  else if (s == "uniform") out = NoiseKind::uniform_baseline;
  else throw std::invalid_argument("expected logit_normal or uniform");
}

template <typename T>
void parse_value(const std::string& s, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    parse_value(trim(item), v);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
}

inline std::string format_value(double v) { return format_double(v); }
inline std::string format_value(std::uint64_t v) { return std::to_string(v); }
inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(const std::string& v) { return v; }
inline std::string format_value(NoiseKind k) { return k == NoiseKind::logit_normal ? "logit_normal" : "uniform"; }

template <typename T>
std::string format_value(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_value(v[i]);
  return out;
}

struct ConfigField {
  std::string key;
  bool required = false;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
ConfigField field(std::string key, Access access, bool required = false) {
  return ConfigField{std::move(key), required,
                     [access](RunConfig& c, const std::string& s) { parse_value(s, access(c)); },
                     [access](const RunConfig& c) { return format_value(access(const_cast<RunConfig&>(c))); }};
}

#define SLE_FIELD(key, member, ...) field(key, [](RunConfig& c) -> auto& { return c.member; } __VA_OPT__(, ) __VA_ARGS__)

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      SLE_FIELD("run.id", run_id, true),
      SLE_FIELD("run.output_dir", output_dir),
      SLE_FIELD("data.classes", data.classes),
      SLE_FIELD("data.dim", data.data_dim),
      SLE_FIELD("data.n_per_class", data.n_per_class),
      SLE_FIELD("data.spread", data.spread),
      SLE_FIELD("data.radius", data.radius),
      SLE_FIELD("data.seed", data.seed, true),
      SLE_FIELD("tokenizer.latent_dim", latent_dim),
      SLE_FIELD("tokenizer.seed", tokenizer_seed),
      SLE_FIELD("model.hidden", hidden),
      SLE_FIELD("model.blocks", blocks),
      SLE_FIELD("model.spherify", spherify),
      SLE_FIELD("train.epochs", train.epochs, true),
      SLE_FIELD("train.batch_size", train.batch_size),
      SLE_FIELD("train.lr", train.adam.lr),
      SLE_FIELD("train.beta1", train.adam.beta1),
      SLE_FIELD("train.beta2", train.adam.beta2),
      SLE_FIELD("train.weight_decay", train.adam.weight_decay),
      SLE_FIELD("train.adam_eps", train.adam.eps),
      SLE_FIELD("train.ema_decay", train.ema_decay),
      SLE_FIELD("train.seed", train.seed, true),
      SLE_FIELD("train.checkpoint_every", train.checkpoint_every),
      SLE_FIELD("noise.kind", train.noise.kind),
      SLE_FIELD("noise.mu", train.noise.mu),
      SLE_FIELD("noise.s", train.noise.s),
      SLE_FIELD("noise.sigma_lo", train.noise.sigma_lo),
      SLE_FIELD("noise.sigma_hi", train.noise.sigma_hi),
      SLE_FIELD("noise.mix_lo", train.noise.mix_lo),
      SLE_FIELD("noise.mix_hi", train.noise.mix_hi),
      SLE_FIELD("noise.mix_probability", train.noise.mix_probability),
      SLE_FIELD("noise.sigma_max", train.noise.sigma_max),
      SLE_FIELD("loss.l1_recon", train.weights.l1_recon),
      SLE_FIELD("loss.l1_cons", train.weights.l1_cons),
      SLE_FIELD("loss.cos_recon", train.weights.cos_recon),
      SLE_FIELD("loss.cos_cons", train.weights.cos_cons),
      SLE_FIELD("loss.latent_cons", train.weights.latent_cons),
      SLE_FIELD("loss.cls_drop_prob", train.weights.cls_drop_prob),
      SLE_FIELD("sample.steps", sampler.steps),
      SLE_FIELD("sample.sigma_max", sampler.sigma_max),
      SLE_FIELD("sample.omega", sampler.omega),
      SLE_FIELD("sample.gamma", sampler.gamma),
      SLE_FIELD("sample.fresh_eps", sampler.fresh_eps),
      SLE_FIELD("sample.seed", sampler.seed),
      SLE_FIELD("sample.ema", sample_with_ema),
      SLE_FIELD("eval.samples", eval_samples),
      SLE_FIELD("eval.steps", eval_steps),
      SLE_FIELD("ablate.seeds", ablate_seeds),
      SLE_FIELD("cost.pixel_encoder_gflops", cost.pixel_encoder.flops_per_forward),
      SLE_FIELD("cost.pixel_decoder_gflops", cost.pixel_decoder.flops_per_forward),
      SLE_FIELD("cost.denoiser_gflops", cost.denoiser.flops_per_forward),
      SLE_FIELD("cost.latent_decoder_gflops", cost.latent_decoder.flops_per_forward),
  };
  return fields;
}

#undef SLE_FIELD

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Unknown, duplicate or
/// malformed keys raise ConfigError carrying the line number; so do missing
/// required keys (line 0).
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const detail::ConfigField* f = nullptr;
    for (const auto& cand : detail::config_fields())
      if (cand.key == key) f = &cand;
    if (!f) throw ConfigError("unknown key '" + key + "'", line_no);
    if (auto it = seen.find(key); it != seen.end())
      throw ConfigError("duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")", line_no);
    seen[key] = line_no;
    try {
      f->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("bad value '" + value + "' for '" + key + "': " + e.what(), line_no);
    }
  }
  for (const auto& f : detail::config_fields())
    if (f.required && !seen.count(f.key)) throw ConfigError("missing required key '" + f.key + "'");
  cfg.validate();
  return cfg;
}

/// Canonical text of every key; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace sle
