#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sle/checkpoint.hpp"
#include "sle/config.hpp"
#include "sle/cost.hpp"
#include "sle/eval.hpp"
#include "sle/experiment.hpp"
#include "sle/sampler.hpp"

namespace sle::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

inline std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::filesystem::path& p) {
  try {
    return parse_config(read_text(p));
  } catch (const ConfigError& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

/// Opens path for appending and writes header first if the file is new or empty.
inline std::ofstream open_csv(const std::filesystem::path& path, const std::string& header) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  if (fresh) out << header << "\n";
  return out;
}

inline const char* kTrainHeader = "epoch,recon_l1,recon_cos,cons_l1,cons_cos,latent_cons,total";
inline const char* kEvalHeader = "run_id,steps,omega,gamma,toy_fid,mmd2,class_acc";
inline const char* kAblateHeader = "axis,arm,seed,steps,toy_fid,mmd2,class_acc";
inline const char* kCostHeader = "table,method,steps,cfg,flops,published,rel_err,check";

inline std::string train_row(const EpochRecord& r) {
  const auto& l = r.loss;
  return std::to_string(r.epoch) + "," + num(l.recon_l1) + "," + num(l.recon_cos) + "," + num(l.cons_l1) + "," +
         num(l.cons_cos) + "," + num(l.latent_cons) + "," + num(l.total);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string resume;
  std::string out;
};

inline int cmd_train(const TrainArgs& a, std::ostream& log) {
  RunConfig cfg = load_config(a.config);
  const std::filesystem::path dir = std::filesystem::path(a.out.empty() ? cfg.output_dir : a.out) / cfg.run_id;
  std::filesystem::create_directories(dir);
  const PreparedData data = prepare_data(cfg);

  Checkpoint ck = fresh_checkpoint(cfg, data);
  if (!a.resume.empty()) {
    Checkpoint loaded = load_checkpoint(a.resume);
    if (to_text(loaded.config) != to_text(cfg)) throw ConfigError("resume checkpoint was written with a different config");
    if (!(loaded.tokenizer == data.tokenizer)) throw Error("resume checkpoint tokenizer differs from the regenerated one");
    ck = std::move(loaded);
  }
  {
    std::ofstream echo(dir / "config.cfg");
    echo << to_text(cfg);
  }
  const auto csv_path = dir / "train.csv";
  if (a.resume.empty()) std::filesystem::remove(csv_path);
  std::ofstream csv = open_csv(csv_path, kTrainHeader);
  const std::size_t every = cfg.train.checkpoint_every;
  run_training(ck, data, [&](const TrainState& s, const EpochRecord& r) {
    csv << train_row(r) << "\n" << std::flush;
    if (every > 0 && r.epoch % every == 0)
      save_checkpoint(dir / ("epoch_" + std::to_string(r.epoch) + ".ckpt"), Checkpoint{cfg, s, data.tokenizer});
    log << "epoch " << r.epoch << " total " << num(r.loss.total) << "\n";
  });
  save_checkpoint(dir / "final.ckpt", ck);
  log << "wrote " << (dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string checkpoint;
  std::string out = "samples.csv";
  std::optional<std::size_t> steps;
  std::optional<double> omega, gamma, sigma_max;
  std::optional<std::size_t> label;
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;
  bool fresh_eps = false;
};

inline SamplerConfig sampler_with_overrides(const Checkpoint& ck, std::optional<std::size_t> steps, std::optional<double> omega,
                                            std::optional<double> gamma, std::optional<double> sigma_max,
                                            std::optional<std::uint64_t> seed) {
  SamplerConfig s = ck.config.sampling();
  if (steps) s.steps = *steps;
  if (omega) s.omega = *omega;
  if (gamma) s.gamma = *gamma;
  if (sigma_max) s.sigma_max = *sigma_max;
  if (seed) s.seed = *seed;
  s.validate();
  return s;
}

inline int cmd_sample(const SampleArgs& a, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  SamplerConfig s = sampler_with_overrides(ck, a.steps, a.omega, a.gamma, a.sigma_max, a.seed);
  s.fresh_eps = s.fresh_eps || a.fresh_eps;
  const std::size_t classes = ck.config.data.classes;
  std::vector<Label> labels;
  if (a.label) {
    if (*a.label >= classes)
      throw ContractError("label " + std::to_string(*a.label) + " out of range [0, " + std::to_string(classes) + ")");
    labels.assign(a.n, Label{*a.label});
  } else if (a.n > 0) {
    labels = balanced_labels(a.n, classes);
  }

  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw Error("cannot open '" + a.out + "' for writing");
  out << "# checkpoint=" << a.checkpoint << "\n";
  out << "# steps=" << s.steps << " omega=" << num(s.omega) << " gamma=" << num(s.gamma) << " sigma_max=" << num(s.sigma_max)
      << " seed=" << s.seed << " fresh_eps=" << (s.fresh_eps ? "true" : "false") << " n=" << a.n
      << " label=" << (a.label ? std::to_string(*a.label) : std::string("balanced"))
      << " weights=" << (ck.config.sample_with_ema ? "ema" : "raw") << "\n";
  out << "label";
  for (std::size_t i = 0; i < ck.config.data.data_dim; ++i) out << ",x" << i;
  out << "\n";
  if (!labels.empty()) {
    const DenseArray x = sample_batch(labels, ck.sampling_parameters(), ck.tokenizer, s);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      out << labels[r].value;
      for (float v : x.row(r)) out << "," << num(v);
      out << "\n";
    }
  }
  log << "wrote " << labels.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string out = "eval.csv";
  std::vector<std::size_t> steps;
  std::optional<double> omega, gamma, sigma_max;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  bool reference = false;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const PreparedData data = prepare_data(ck.config);
  const std::size_t n = a.n.value_or(ck.config.eval_samples);
  if (n == 0 || n % ck.config.data.classes != 0)
    throw ContractError("--n " + std::to_string(n) + " must be a positive multiple of the class count " +
                        std::to_string(ck.config.data.classes));
  std::ofstream csv = open_csv(a.out, kEvalHeader);
  const std::vector<std::size_t> steps = a.steps.empty() ? ck.config.eval_steps : a.steps;
  if (a.reference) {
    std::vector<Label> labels = data.dataset.labels;
    const MetricRecord m = score_samples(data.dataset.x, labels, data.dataset);
    csv << ck.config.run_id << "-reference,0,0,0," << num(m.toy_fid) << "," << num(m.mmd2) << "," << num(m.class_acc) << "\n";
    log << "reference toy_fid " << num(m.toy_fid) << "\n";
    return kExitOk;
  }
  for (std::size_t t : steps) {
    const SamplerConfig s = sampler_with_overrides(ck, t, a.omega, a.gamma, a.sigma_max, a.seed);
    const MetricRecord m = evaluate(ck.sampling_parameters(), ck.tokenizer, s, data.dataset, n);
    csv << ck.config.run_id << "," << t << "," << num(s.omega) << "," << num(s.gamma) << "," << num(m.toy_fid) << ","
        << num(m.mmd2) << "," << num(m.class_acc) << "\n"
        << std::flush;
    log << "steps " << t << " toy_fid " << num(m.toy_fid) << " mmd2 " << num(m.mmd2) << " class_acc " << num(m.class_acc)
        << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- cost

struct CostArgs {
  std::string mode = "paper";
  std::size_t steps = 4;
  bool cfg = false;
  std::string checkpoint;
  std::string config;
  std::string format = "text";
};

struct CostRow {
  std::string table, method;
  std::size_t steps = 0;
  bool cfg = false;
  double flops = 0.0;
  std::optional<double> published;
};

inline std::optional<double> published_cost(const std::string& table, const std::string& method, std::size_t steps, bool cfg) {
  if (table == "imagenet" && cfg) {
    if (method == "Sphere Encoder" && steps == 4) return paper_costs::pixel_loop_t4_cfg;
    if (method == "Ours" && steps == 6) return paper_costs::latent_t6_cfg;
  }
  if (table == "small" && !cfg)
    for (std::size_t i = 0; i < 3; ++i)
      if (paper_costs::small_steps[i] == steps)
        return method == "Ours" ? paper_costs::small_ours[i] : paper_costs::small_sphere_encoder[i];
  return std::nullopt;
}

inline std::vector<CostRow> paper_cost_rows(std::size_t steps, bool cfg, const CostTable& t) {
  std::vector<CostRow> rows;
  auto add = [&](const std::string& table, const std::string& method, double flops) {
    rows.push_back({table, method, steps, cfg, flops, published_cost(table, method, steps, cfg)});
  };
  add("imagenet", "Sphere Encoder", flops_pixel_loop_pipeline(steps, cfg, t.pixel_encoder, t.pixel_decoder).total);
  add("imagenet", "Ours", flops_latent_pipeline(steps, cfg, t.denoiser, t.latent_decoder).total);
  const auto [d, e] = paper_costs::small_sphere_encoder_parts();
  add("small", "Sphere Encoder", flops_pixel_loop_pipeline(steps, cfg, e, d).total);
  add("small", "Ours", flops_latent_pipeline(steps, cfg, paper_costs::small_ours_denoiser(), paper_costs::ours_decoder).total);
  return rows;
}

inline int cmd_cost(const CostArgs& a, std::ostream& out) {
  std::vector<CostRow> rows;
  if (a.mode == "paper") {
    CostTable table;
    if (!a.config.empty()) table = load_config(a.config).cost;
    rows = paper_cost_rows(a.steps, a.cfg, table);
  } else if (a.mode == "toy") {
    RunConfig cfg;
    LinearTokenizer tok = LinearTokenizer::identity(2);
    if (!a.checkpoint.empty()) {
      Checkpoint ck = load_checkpoint(a.checkpoint);
      tok = ck.tokenizer;
      cfg = ck.config;
    } else if (!a.config.empty()) {
      cfg = load_config(a.config);
      tok = LinearTokenizer::random(cfg.data.data_dim, cfg.latent_dim, cfg.tokenizer_seed);
    } else {
      throw ConfigError("--mode toy needs --checkpoint or --config");
    }
    rows.push_back({"toy", "latent pipeline", a.steps, a.cfg,
                    flops_latent_pipeline(a.steps, a.cfg, flops_toy_model(cfg.arch()), flops_toy_decoder(tok)).total, {}});
    rows.push_back({"toy", "pixel loop", a.steps, a.cfg,
                    flops_pixel_loop_pipeline(a.steps, a.cfg, flops_toy_encoder(tok), flops_toy_decoder(tok)).total, {}});
  } else {
    throw ConfigError("--mode must be paper or toy");
  }

  auto rel = [](const CostRow& r) { return r.published ? relative_error(r.flops, *r.published) : 0.0; };
  auto check = [&](const CostRow& r) -> std::string { return r.published ? (rel(r) <= 0.01 ? "PASS" : "FAIL") : "-"; };
  if (a.format == "csv") {
    out << kCostHeader << "\n";
    for (const auto& r : rows)
      out << r.table << "," << r.method << "," << r.steps << "," << (r.cfg ? 1 : 0) << "," << num(r.flops) << ","
          << (r.published ? num(*r.published) : "") << "," << (r.published ? num(rel(r)) : "") << "," << check(r) << "\n";
  } else {
    char line[160];
    std::snprintf(line, sizeof line, "%-9s %-16s %5s %4s %14s %10s %8s %5s\n", "table", "method", "steps", "cfg",
                  a.mode == "paper" ? "GFLOPs" : "FLOPs", "published", "rel_err", "check");
    out << line;
    for (const auto& r : rows) {
      char pub[32] = "-", err[32] = "-";
      if (r.published) {
        std::snprintf(pub, sizeof pub, "%.0f", *r.published);
        std::snprintf(err, sizeof err, "%.3f%%", 100.0 * rel(r));
      }
      std::snprintf(line, sizeof line, "%-9s %-16s %5zu %4s %14.1f %10s %8s %5s\n", r.table.c_str(), r.method.c_str(),
                    r.steps, r.cfg ? "yes" : "no", r.flops, pub, err, check(r).c_str());
      out << line;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string config;
  std::string out;
};

inline int cmd_ablate(const AblateArgs& a, std::ostream& log) {
  const RunConfig base = load_config(a.config);
  const std::filesystem::path dir = std::filesystem::path(a.out.empty() ? base.output_dir : a.out) / base.run_id;
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / "ablate.csv";
  std::filesystem::remove(csv_path);
  std::ofstream csv = open_csv(csv_path, kAblateHeader);
  const std::size_t ref_steps = base.sampler.steps;
  for (std::uint64_t seed : base.ablate_seeds) {
    for (const AblationArm& arm : ablation_arms(base)) {
      RunConfig c = arm.config;
      c.train.seed = base.train.seed + seed;
      c.sampler.seed = base.sampler.seed + seed;
      const PreparedData data = prepare_data(c);
      Checkpoint ck = fresh_checkpoint(c, data);
      run_training(ck, data);
      const std::vector<std::size_t> steps = arm.axis == "reference" ? base.eval_steps : std::vector<std::size_t>{ref_steps};
      for (std::size_t t : steps) {
        const MetricRecord m = evaluate_checkpoint(ck, data, t, c.eval_samples, c.sampler.omega);
        csv << (arm.axis == "reference" && t != ref_steps ? "steps" : arm.axis) << "," << arm.name << "," << seed << "," << t
            << "," << num(m.toy_fid) << "," << num(m.mmd2) << "," << num(m.class_acc) << "\n"
            << std::flush;
        log << arm.name << " seed " << seed << " steps " << t << " toy_fid " << num(m.toy_fid) << "\n";
      }
    }
  }
  log << "wrote " << csv_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- entry

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sphere latent encoder: train, sample, evaluate and cost toy models"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a denoiser from a run config");
  train->add_option("config", ta.config, "Run config file")->required();
  train->add_option("--resume", ta.resume, "Checkpoint to resume from");
  train->add_option("--out", ta.out, "Output root (default: run.output_dir)");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Generate samples from a checkpoint");
  sample->add_option("checkpoint", sa.checkpoint, "Checkpoint file")->required();
  sample->add_option("--out", sa.out, "Samples CSV");
  sample->add_option("--steps", sa.steps, "Sampling steps T");
  sample->add_option("--omega", sa.omega, "Guidance scale");
  sample->add_option("--gamma", sa.gamma, "Noise decay exponent");
  sample->add_option("--sigma-max", sa.sigma_max, "Maximum re-noising level");
  sample->add_option("--label", sa.label, "Class label (default: class-balanced)");
  sample->add_option("--n", sa.n, "Number of samples")->required();
  sample->add_option("--seed", sa.seed, "Sampling seed");
  sample->add_flag("--fresh-eps", sa.fresh_eps, "Draw new noise at every step");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Append class-balanced metrics to a CSV");
  eval->add_option("checkpoint", ea.checkpoint, "Checkpoint file")->required();
  eval->add_option("--out", ea.out, "Metrics CSV (appended)");
  eval->add_option("--steps", ea.steps, "Sampling steps (repeatable)");
  eval->add_option("--omega", ea.omega, "Guidance scale");
  eval->add_option("--gamma", ea.gamma, "Noise decay exponent");
  eval->add_option("--sigma-max", ea.sigma_max, "Maximum re-noising level");
  eval->add_option("--n", ea.n, "Samples (multiple of the class count)");
  eval->add_option("--seed", ea.seed, "Sampling seed");
  eval->add_flag("--reference", ea.reference, "Score the training set against itself");

  CostArgs ca;
  auto* cost = app.add_subcommand("cost", "Print sampling FLOP tables");
  cost->add_option("--mode", ca.mode, "paper or toy")->check(CLI::IsMember({"paper", "toy"}));
  cost->add_option("--steps", ca.steps, "Sampling steps")->check(CLI::PositiveNumber);
  cost->add_flag("--cfg", ca.cfg, "Classifier-free guidance (doubles passes)");
  cost->add_option("--checkpoint", ca.checkpoint, "Checkpoint for toy mode");
  cost->add_option("--config", ca.config, "Config for toy mode or custom component costs");
  cost->add_option("--format", ca.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Train and score every ablation arm");
  ablate->add_option("config", aa.config, "Reference run config")->required();
  ablate->add_option("--out", aa.out, "Output root (default: run.output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(ta, out);
    if (*sample) return cmd_sample(sa, out);
    if (*eval) return cmd_eval(ea, out);
    if (*cost) return cmd_cost(ca, out);
    if (*ablate) return cmd_ablate(aa, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace sle::cli
