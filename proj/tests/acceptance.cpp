// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any criterion fails. Optional arguments select criteria by
// number (default: all).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace sle;
using sle::testing::ArrayD;
using sle::testing::random_array;

namespace {

// Pinned tolerances.
constexpr double kCostRelTol = 0.01;
constexpr double kCostSeconds = 1.0;
constexpr double kGradRelTol = 1e-3;
constexpr int kGradInstances = 100;
constexpr double kGradSeconds = 60.0;
constexpr int kStopGradGraphs = 20;
constexpr int kSphereCalls = 100000;
constexpr double kSphereTol = 1e-4;
constexpr int kKsDraws = 1000000;
constexpr double kKsTol = 0.01;
constexpr double kDecayTol = 1e-9;
constexpr double kUntrainedFactor = 10.0;
constexpr double kGuidedAccuracy = 0.9;
constexpr double kSpherifyFactor = 1.5;

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

RunConfig reference_config() {
  std::ifstream in(std::string(SLE_SOURCE_DIR) + "/configs/reference.cfg");
  if (!in) throw Error("cannot read configs/reference.cfg");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ------------------------------------------------------------------ 1

Verdict cost_tables() {
  namespace pc = paper_costs;
  const auto t0 = Clock::now();
  Verdict v;
  double worst = 0.0;
  auto check = [&](double got, double published) {
    const double e = relative_error(got, published);
    worst = std::max(worst, e);
    if (e >= kCostRelTol) v.pass = false;
  };
  check(flops_pixel_loop_pipeline(4, true, pc::sphere_encoder_encoder, pc::sphere_encoder_decoder).total, pc::pixel_loop_t4_cfg);
  check(flops_latent_pipeline(6, true, pc::ours_denoiser, pc::ours_decoder).total, pc::latent_t6_cfg);
  const auto den = pc::small_ours_denoiser();
  const auto [dec, enc] = pc::small_sphere_encoder_parts();
  for (int i = 0; i < 3; ++i) {
    check(flops_latent_pipeline(pc::small_steps[i], false, den, pc::ours_decoder).total, pc::small_ours[i]);
    check(flops_pixel_loop_pipeline(pc::small_steps[i], false, enc, dec).total, pc::small_sphere_encoder[i]);
  }
  const double secs = seconds_since(t0);
  if (secs >= kCostSeconds) v.pass = false;
  v.detail = "8 totals, worst rel err " + fmt("%.4f", worst) + ", " + fmt("%.3f", secs) + " s";
  return v;
}

// ------------------------------------------------------------------ 2

// Leaves, then constants holding the unperturbed inputs.
template <typename T>
using Build = std::function<Var(Graph<T>&, const std::vector<Var>&, const std::vector<Var>&)>;

struct GradCase {
  std::string name;
  std::function<std::vector<ArrayD>(Rng&)> inputs;
  Build<float> build_f;
  Build<double> build_d;
};

#define SLE_BOTH(...)                                                          \
  Build<float>([=](Graph<float>& g, const std::vector<Var>& v, const std::vector<Var>&) __VA_ARGS__),  \
      Build<double>([=](Graph<double>& g, const std::vector<Var>& v, const std::vector<Var>&) __VA_ARGS__)

// Fixed random projection so vector outputs reduce to a scalar.
template <typename T>
Var reduce(Graph<T>& g, Var x) {
  Rng rng(17);
  BasicArray<T> w(g.value(x).shape());
  for (auto& e : w.values()) e = static_cast<T>(rng.uniform(-1.0, 1.0));
  return ops::add(g, ops::cosine_loss(g, x, g.constant(std::move(w))), ops::mean(g, x));
}

std::vector<GradCase> grad_cases() {
  const DenoiserArch arch = sle::testing::tiny_arch();
  const auto layout = denoiser_layout(arch);
  std::vector<GradCase> cases;
  auto params_inputs = [layout](Rng& rng) {
    std::vector<ArrayD> in;
    for (const auto& s : layout) in.push_back(random_array(s.shape, rng, -0.5, 0.5));
    return in;
  };
  cases.push_back({"affine", [](Rng& r) { return std::vector<ArrayD>{random_array({3, 4}, r), random_array({4, 5}, r), random_array({5}, r)}; },
                   SLE_BOTH({ return reduce(g, ops::affine(g, v[0], v[1], v[2])); })});
  cases.push_back({"silu", [](Rng& r) { return std::vector<ArrayD>{random_array({2, 6}, r, -4, 4)}; },
                   SLE_BOTH({ return reduce(g, ops::silu(g, v[0])); })});
  cases.push_back({"add", [](Rng& r) { return std::vector<ArrayD>{random_array({3, 3}, r), random_array({3, 3}, r)}; },
                   SLE_BOTH({ return reduce(g, ops::add(g, v[0], v[1])); })});
  cases.push_back({"sub", [](Rng& r) { return std::vector<ArrayD>{random_array({3, 3}, r), random_array({3, 3}, r)}; },
                   SLE_BOTH({ return reduce(g, ops::sub(g, v[0], v[1])); })});
  cases.push_back({"scale", [](Rng& r) { return std::vector<ArrayD>{random_array({4}, r)}; },
                   Build<float>([](Graph<float>& g, const std::vector<Var>& v, const std::vector<Var>&) { return reduce(g, ops::scale(g, v[0], -1.7f)); }),
                   Build<double>([](Graph<double>& g, const std::vector<Var>& v, const std::vector<Var>&) { return reduce(g, ops::scale(g, v[0], static_cast<double>(-1.7f))); })});
  cases.push_back({"gather_rows", [](Rng& r) { return std::vector<ArrayD>{random_array({4, 3}, r)}; },
                   SLE_BOTH({ return reduce(g, ops::gather_rows(g, v[0], {3, 1, 3, 0})); })});
  cases.push_back({"rms_normalize", [](Rng& r) { return std::vector<ArrayD>{random_array({3, 5}, r)}; },
                   Build<float>([](Graph<float>& g, const std::vector<Var>& v, const std::vector<Var>&) { return reduce(g, ops::rms_normalize(g, v[0], kRmsEps)); }),
                   Build<double>([](Graph<double>& g, const std::vector<Var>& v, const std::vector<Var>&) {
                     return reduce(g, ops::rms_normalize(g, v[0], static_cast<double>(kRmsEps)));
                   })});
  cases.push_back({"mean_abs_error", [](Rng& r) { return std::vector<ArrayD>{random_array({3, 4}, r), random_array({3, 4}, r)}; },
                   SLE_BOTH({ return ops::mean_abs_error(g, v[0], v[1]); })});
  cases.push_back({"cosine_loss", [](Rng& r) { return std::vector<ArrayD>{random_array({3, 4}, r), random_array({3, 4}, r)}; },
                   SLE_BOTH({ return ops::cosine_loss(g, v[0], v[1]); })});
  cases.push_back({"sum", [](Rng& r) { return std::vector<ArrayD>{random_array({2, 3}, r)}; },
                   SLE_BOTH({ return ops::sum(g, ops::silu(g, v[0])); })});
  cases.push_back({"mean", [](Rng& r) { return std::vector<ArrayD>{random_array({2, 3}, r)}; },
                   SLE_BOTH({ return ops::mean(g, ops::silu(g, v[0])); })});
  // The double side sees the stopped input as a frozen constant.
  cases.push_back({"stop_gradient", [](Rng& r) { return std::vector<ArrayD>{random_array({2, 3}, r)}; },
                   Build<float>([](Graph<float>& g, const std::vector<Var>& v, const std::vector<Var>&) {
                     return ops::cosine_loss(g, ops::silu(g, v[0]), ops::stop_gradient(g, v[0]));
                   }),
                   Build<double>([](Graph<double>& g, const std::vector<Var>& v, const std::vector<Var>& base) {
                     return ops::cosine_loss(g, ops::silu(g, v[0]), base[0]);
                   })});

  // Denoiser forward with its parameters as the differentiated inputs.
  auto denoiser_inputs = [params_inputs, arch](Rng& r) {
    auto in = params_inputs(r);
    in.insert(in.begin(), spherify_rows(sle::testing::random_floats({3, arch.latent_dim}, r)).cast<double>());
    return in;
  };
  cases.push_back({"denoiser", denoiser_inputs, SLE_BOTH({
                     std::vector<Var> p(v.begin() + 1, v.end());
                     const std::vector<Label> y{Label{0}, Label{3}, Label{1}};
                     return reduce(g, denoise(g, p, arch, v[0], y));
                   })});

  // Composed training loss (all terms on) as a function of the parameters.
  struct LossFixture {
    ArrayD z;
    BatchNoise noise;
    std::vector<Label> labels;
  };
  auto fixture = std::make_shared<LossFixture>();
  LossWeights w;
  w.latent_cons = 1.0;
  NoiseDistConfig nc;
  nc.sigma_hi = 0.85;
  nc.mix_lo = 0.85;
  nc.mix_hi = 0.89;
  auto loss_inputs = [params_inputs, fixture, arch, w, nc](Rng& r) {
    fixture->z = spherify_rows(sle::testing::random_floats({3, arch.latent_dim}, r)).cast<double>();
    fixture->noise = draw_batch_noise(3, arch.latent_dim, nc, w, r);
    fixture->labels = {Label{0}, Label{2}, Label{1}};
    return params_inputs(r);
  };
  cases.push_back({"training_loss", loss_inputs,
                   Build<float>([fixture, arch, w](Graph<float>& g, const std::vector<Var>& v, const std::vector<Var>&) {
                     return build_training_loss(g, v, arch, fixture->z.cast<float>(), fixture->labels, fixture->noise, w).total;
                   }),
                   Build<double>([fixture, arch, w](Graph<double>& g, const std::vector<Var>& v, const std::vector<Var>& base) {
                     LossOptions opt;
                     opt.target_params = base;  // stop-gradient target at the unperturbed weights
                     return build_training_loss(g, v, arch, fixture->z, fixture->labels, fixture->noise, w, opt).total;
                   })});
  return cases;
}

#undef SLE_BOTH

// Float analytic gradient against double central differences.
double case_error(const GradCase& c, const std::vector<ArrayD>& in) {
  auto build = [&](auto& g, const std::vector<Var>& v, const std::vector<Var>& base) -> Var {
    if constexpr (std::is_same_v<std::remove_reference_t<decltype(g)>, Graph<float>>)
      return c.build_f(g, v, base);
    else
      return c.build_d(g, v, base);
  };
  return sle::testing::float_gradient_error(build, in, 1e-6);
}

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  Verdict v;
  Rng rng(2024);
  std::string worst_name;
  double worst = 0.0;
  std::size_t instances = 0;
  const auto cases = grad_cases();
  for (const auto& c : cases) {
    for (int i = 0; i < kGradInstances; ++i) {
      const double e = case_error(c, c.inputs(rng));
      ++instances;
      if (!(e < kGradRelTol)) v.pass = false;
      if (!(e <= worst)) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= kGradSeconds) v.pass = false;
  v.detail = std::to_string(cases.size()) + " ops x " + std::to_string(kGradInstances) + " instances (" +
             std::to_string(instances) + "), worst rel err " + fmt("%.2e", worst) + " (" + worst_name + "), " +
             fmt("%.1f", secs) + " s";
  return v;
}

// ------------------------------------------------------------------ 3

Verdict stop_gradient_suite() {
  Verdict v;
  Rng rng(77);
  std::size_t checked = 0;
  for (int trial = 0; trial < kStopGradGraphs; ++trial) {
    const DenoiserArch a{2 + static_cast<std::size_t>(rng.uniform() * 8), 4 + static_cast<std::size_t>(rng.uniform() * 12),
                         static_cast<std::size_t>(rng.uniform() * 3), 2 + static_cast<std::size_t>(rng.uniform() * 4)};
    const std::size_t batch = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    // Separate weight copies for the target (low-noise) pass and the
    // prediction (high-noise) pass; same values so it is the real loss.
    auto p = DenoiserParameters::initialize(a, 1000 + trial);
    Graph<float> g;
    auto big_params = bind_parameters(g, p.tensors(), true);
    auto small_params = bind_parameters(g, p.tensors(), true);
    DenseArray z = spherify_rows(sle::testing::random_floats({batch, a.latent_dim}, rng));
    std::vector<NoiseLevelPair> pairs;
    NoiseDistConfig nc;
    for (std::size_t r = 0; r < batch; ++r) pairs.push_back(sample_noise_pair(nc, rng));
    DenseArray eps = sle::testing::random_floats({batch, a.latent_dim}, rng);
    std::vector<Label> labels;
    for (std::size_t r = 0; r < batch; ++r) labels.push_back(Label{static_cast<std::size_t>(rng.uniform() * (a.classes + 1))});
    Var vs = g.constant(detail::project_rows(detail::noisy_rows(z, eps, pairs, true), true));
    Var vb = g.constant(detail::project_rows(detail::noisy_rows(z, eps, pairs, false), true));
    Var small = denoise(g, small_params, a, vs, labels);
    Var big = denoise(g, big_params, a, vb, labels);
    g.backward(consistency_loss(g, big, small, LossWeights{}));
    for (Var s : small_params) {
      for (float x : g.grad(s).values()) {
        ++checked;
        if (std::bit_cast<std::uint32_t>(x) != 0u) v.pass = false;
      }
    }
  }
  v.detail = std::to_string(kStopGradGraphs) + " graphs, " + std::to_string(checked) + " target-branch gradients all +0.0";
  if (!v.pass) v.detail = "nonzero gradient reached the target branch";
  return v;
}

// ------------------------------------------------------------------ 4

Verdict sphere_invariants() {
  Verdict v;
  Rng rng(4);
  double worst = 0.0;
  for (int i = 0; i < kSphereCalls; ++i) {
    const std::size_t d = 2 + static_cast<std::size_t>(rng.uniform() * 126);
    // Mean-square of the input log-uniform in [1e-2, 1e8].
    std::vector<double> raw(d);
    double ms = 0.0;
    for (auto& x : raw) {
      x = rng.normal();
      ms += x * x / static_cast<double>(d);
    }
    const double target = std::pow(10.0, rng.uniform(-2.0, 8.0));
    DenseArray z(Shape{d});
    for (std::size_t i = 0; i < d; ++i) z[i] = static_cast<float>(raw[i] * std::sqrt(target / ms));
    SphereLatent s = spherify(z);
    if (i % 2 == 1) {
      DenseArray e(Shape{d});
      for (auto& x : e.values()) x = static_cast<float>(rng.normal());
      s = perturb(s, static_cast<float>(rng.uniform(0.0, 90.0)), e);
    }
    worst = std::max(worst, std::abs(s.mean_square() - 1.0));
  }
  if (!(worst <= kSphereTol)) v.pass = false;

  NoiseDistConfig nc;  // mu 0.4, s 1, [0, 85], mix [85, 89], p 0.2
  Rng r1(5);
  std::mt19937_64 eng(6);
  std::vector<double> got(kKsDraws), want(kKsDraws);
  for (int i = 0; i < kKsDraws; ++i) {
    got[i] = sample_noise_pair(nc, r1).sigma;
    want[i] = sle::testing::oracle_sigma(eng, nc.mu, nc.s, nc.sigma_lo, nc.sigma_hi, nc.mix_lo, nc.mix_hi, nc.mix_probability);
  }
  const double ks = sle::testing::ks_statistic(got, want);
  if (!(ks < kKsTol)) v.pass = false;

  double decay_err = 0.0;
  for (double gamma : {0.5, 0.75, 1.0})
    for (std::size_t T = 1; T <= 64; ++T)
      for (std::size_t t = 0; t < T; ++t)
        decay_err = std::max(decay_err, std::abs(decay_factor(t, T, gamma) -
                                                 std::pow(1.0 - static_cast<double>(t + 1) / static_cast<double>(T), gamma)));
  if (!(decay_err <= kDecayTol)) v.pass = false;
  v.detail = "max |ms-1| " + fmt("%.6e", worst) + " over " + std::to_string(kSphereCalls) + " calls, KS " + fmt("%.4f", ks) +
             ", decay err " + fmt("%.1e", decay_err);
  return v;
}

// ------------------------------------------------------------------ 5

Verdict sampler_contract() {
  Verdict v;
  const DenoiserArch a{8, 16, 2, 4};
  auto p = DenoiserParameters::initialize(a, 5);
  Rng jitter(6);
  for (auto& e : p.tensors())
    for (auto& x : e.array.values()) x += static_cast<float>(0.1 * jitter.normal());
  const auto tok = LinearTokenizer::random(12, 8, 2);
  const auto labels = balanced_labels(40, 4);
  bool counts_ok = true;
  for (std::size_t T : {1u, 2u, 4u, 8u})
    for (double omega : {1.0, 2.0}) {
      SamplerConfig c;
      c.steps = T;
      c.omega = omega;
      c.sigma_max = 4.8;
      SamplerCounters n;
      sample_batch(labels, p, tok, c, &n);
      const std::size_t per = omega == 1.0 ? T : 2 * T;
      counts_ok = counts_ok && n.denoiser_calls == per * labels.size() && n.decode_calls == labels.size() &&
                  n.encode_calls == 0 && n.samples == labels.size();
    }
  SamplerConfig c;
  c.steps = 4;
  c.sigma_max = 4.8;
  const DenseArray base = sample_batch(labels, p, tok, c);
  auto q = p;
  for (auto& x : q.embedding().row(a.classes)) x = static_cast<float>(jitter.normal() * 10.0);
  const bool null_free = bit_equal(base, sample_batch(labels, q, tok, c));
  c.omega = 2.0;
  const bool deterministic = bit_equal(sample_batch(labels, p, tok, c), sample_batch(labels, p, tok, c));
  v.pass = counts_ok && null_free && deterministic;
  v.detail = std::string("call counts ") + (counts_ok ? "ok" : "WRONG") + ", omega=1 null-embedding independence " +
             (null_free ? "ok" : "BROKEN") + ", seeded determinism " + (deterministic ? "ok" : "BROKEN");
  return v;
}

// ------------------------------------------------------------------ 6, 7

struct TrainedArm {
  Checkpoint ck;
  PreparedData data;
};

TrainedArm train_arm(RunConfig c, std::uint64_t seed_offset) {
  c.train.seed += seed_offset;
  c.sampler.seed += seed_offset;
  PreparedData data = prepare_data(c);
  Checkpoint ck = fresh_checkpoint(c, data);
  run_training(ck, data);
  return {std::move(ck), std::move(data)};
}

double fid_at(const TrainedArm& arm, std::size_t steps, double omega = 1.0) {
  return evaluate_checkpoint(arm.ck, arm.data, steps, arm.ck.config.eval_samples, omega).toy_fid;
}

std::optional<TrainedArm> g_reference;  // seed offset 0, shared by 6 and 7

const TrainedArm& reference_arm() {
  if (!g_reference) g_reference = train_arm(reference_config(), 0);
  return *g_reference;
}

Verdict end_to_end() {
  const auto t0 = Clock::now();
  Verdict v;
  const RunConfig cfg = reference_config();
  const TrainedArm& ref = reference_arm();
  const double train_secs = seconds_since(t0);
  const PreparedData& data = ref.data;
  const Checkpoint untrained = fresh_checkpoint(cfg, data);
  const double fid_untrained = evaluate_checkpoint(untrained, data, 4, cfg.eval_samples, 1.0).toy_fid;
  const double f2 = fid_at(ref, 2), f4 = fid_at(ref, 4), f8 = fid_at(ref, 8);
  const MetricRecord guided = evaluate_checkpoint(ref.ck, data, 4, cfg.eval_samples, 2.0);
  const bool better = fid_untrained >= kUntrainedFactor * f4;
  const bool monotone = f4 <= f2 && f8 <= f4;
  const bool accurate = guided.class_acc > kGuidedAccuracy;
  v.pass = better && monotone && accurate;
  v.detail = "toy-FID untrained " + fmt("%.3f", fid_untrained) + " vs trained T=4 " + fmt("%.4f", f4) + " (" +
             fmt("%.0f", fid_untrained / f4) + "x); T=2/4/8 " + fmt("%.4f", f2) + "/" + fmt("%.4f", f4) + "/" +
             fmt("%.4f", f8) + "; class acc T=4 omega=2 " + fmt("%.4f", guided.class_acc) + "; train " +
             fmt("%.0f", train_secs) + " s";
  return v;
}

Verdict ablations() {
  Verdict v;
  const RunConfig base = reference_config();
  const auto arms = ablation_arms(base);
  auto arm_config = [&](const std::string& name) {
    for (const auto& a : arms)
      if (a.name == name) return a.config;
    throw Error("no ablation arm " + name);
  };
  std::string detail;
  bool rc_ok = true, sph_ok = true, noise_ok = true;
  for (std::uint64_t seed : base.ablate_seeds) {
    const double ref = seed == 0 ? fid_at(reference_arm(), base.sampler.steps)
                                 : fid_at(train_arm(base, seed), base.sampler.steps);
    const double recon_only = fid_at(train_arm(arm_config("recon_only"), seed), base.sampler.steps);
    const double no_sph = fid_at(train_arm(arm_config("no_spherify"), seed), base.sampler.steps);
    const double uniform = fid_at(train_arm(arm_config("uniform"), seed), base.sampler.steps);
    rc_ok = rc_ok && ref < recon_only;
    sph_ok = sph_ok && no_sph >= kSpherifyFactor * ref;
    noise_ok = noise_ok && ref <= uniform;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": R+C " + fmt("%.4f", ref) +
              " R " + fmt("%.4f", recon_only) + " no-sph " + fmt("%.4f", no_sph) + " (" + fmt("%.1f", no_sph / ref) +
              "x) uniform " + fmt("%.4f", uniform);
  }
  v.pass = rc_ok && sph_ok && noise_ok;
  v.detail = detail + " | R+C<R " + (rc_ok ? "ok" : "FAIL") + ", spherify " + (sph_ok ? "ok" : "FAIL") +
             ", logit-normal<=uniform " + (noise_ok ? "ok" : "FAIL");
  return v;
}

// ------------------------------------------------------------------ 8

Verdict persistence() {
  Verdict v;
  RunConfig cfg = sle::testing::small_config("accept");
  cfg.train.epochs = 6;
  const PreparedData data = prepare_data(cfg);
  sle::testing::TempDir dir("accept");

  Checkpoint whole = fresh_checkpoint(cfg, data);
  run_training(whole, data);
  save_checkpoint(dir.path() / "a.ckpt", whole);
  save_checkpoint(dir.path() / "b.ckpt", load_checkpoint(dir.path() / "a.ckpt"));
  auto bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const bool roundtrip = bytes(dir.path() / "a.ckpt") == bytes(dir.path() / "b.ckpt");

  Checkpoint part = fresh_checkpoint(cfg, data);
  TrainConfig first = part.config.training();
  first.epochs = 3;
  train(data.latents, part.state, first);
  save_checkpoint(dir.path() / "mid.ckpt", part);
  Checkpoint resumed = load_checkpoint(dir.path() / "mid.ckpt");
  run_training(resumed, data);
  const bool resume = encode_archive(to_archive(resumed)) == encode_archive(to_archive(whole));
  v.pass = roundtrip && resume;
  v.detail = std::string("save/load/save ") + (roundtrip ? "byte-identical" : "DIFFERS") + ", resume after 3 of 6 epochs " +
             (resume ? "bit-exact" : "DIFFERS");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"cost tables", cost_tables},
      {"gradient suite", gradient_suite},
      {"stop-gradient suite", stop_gradient_suite},
      {"sphere invariants", sphere_invariants},
      {"sampler contract", sampler_contract},
      {"end-to-end reference run", end_to_end},
      {"ablation orderings", ablations},
      {"persistence", persistence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
