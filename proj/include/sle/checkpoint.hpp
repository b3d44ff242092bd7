#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sle/config.hpp"
#include "sle/data.hpp"
#include "sle/denoiser.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/optim.hpp"
#include "sle/tokenizer.hpp"
#include "sle/trainer.hpp"

namespace sle {

inline constexpr char kArchiveMagic[4] = {'S', 'L', 'E', '1'};
inline constexpr std::uint32_t kArchiveVersion = 1;

/// Binary container shared by checkpoints and latent caches. Layout, all
/// integers little-endian:
///   "SLE1" u32 version u64 epoch u64 step
///   str config_text  str rng_state  u64 array_count
///   per array: str name  u32 rank  u64 dims[rank]  f32 values[prod(dims)]
/// where str is u64 length followed by the bytes.
struct Archive {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::string config_text;
  std::string rng_state;
  std::vector<NamedArray> arrays;

  const DenseArray& at(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return a.array;
    throw FormatError("archive has no array named '" + name + "'");
  }
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("archive is truncated");
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> encode_archive(const Archive& a) {
  detail::ByteWriter w;
  w.raw(kArchiveMagic, 4);
  w.u32(kArchiveVersion);
  w.u64(a.epoch);
  w.u64(a.step);
  w.str(a.config_text);
  w.str(a.rng_state);
  w.u64(a.arrays.size());
  for (const auto& e : a.arrays) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.array.rank()));
    for (std::size_t d : e.array.shape()) w.u64(d);
    for (float v : e.array.values()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return w.bytes();
}

inline Archive decode_archive(std::vector<char> bytes) {
  detail::ByteReader r(std::move(bytes));
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kArchiveMagic, 4) != 0) throw FormatError("not an SLE1 archive (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kArchiveVersion) throw FormatError("unsupported archive version " + std::to_string(version));
  Archive a;
  a.epoch = r.u64();
  a.step = r.u64();
  a.config_text = r.str();
  a.rng_state = r.str();
  const std::uint64_t count = r.u64();
  std::set<std::string> names;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    if (!names.insert(name).second) throw FormatError("duplicate array '" + name + "' in archive");
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError("array '" + name + "' has invalid rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > (std::uint64_t{1} << 32)) throw FormatError("array '" + name + "' has an invalid dimension");
    }
    std::vector<float> values(shape_size(shape));
    for (float& v : values) v = std::bit_cast<float>(r.u32());
    a.arrays.push_back({std::move(name), DenseArray(std::move(shape), std::move(values))});
  }
  if (!r.done()) throw FormatError("trailing bytes after archive");
  return a;
}

/// Writes to a temporary file and renames it over path, so a failed write
/// leaves the previous file intact.
inline void write_archive(const std::filesystem::path& path, const Archive& a) {
  const auto bytes = encode_archive(a);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw Error("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(std::move(bytes));
}

/// A training snapshot: config echo, full train state and the tokenizer.
struct Checkpoint {
  RunConfig config;
  TrainState state;
  LinearTokenizer tokenizer;

  /// Weights used for sampling (EMA shadow or raw, per config).
  DenoiserParameters sampling_parameters() const {
    return config.sample_with_ema ? state.ema_parameters() : state.params;
  }
};

inline Archive to_archive(const Checkpoint& c) {
  Archive a;
  a.epoch = c.state.epoch;
  a.step = c.state.opt.step;
  a.config_text = to_text(c.config);
  a.rng_state = c.state.rng.state();
  auto put = [&](const std::string& prefix, const ParameterSet& set) {
    for (const auto& e : set) a.arrays.push_back({prefix + e.name, e.array});
  };
  put("model/", c.state.params.tensors());
  put("ema/", c.state.ema.shadow);
  put("adam_m/", c.state.opt.first_moment);
  put("adam_v/", c.state.opt.second_moment);
  a.arrays.push_back({"tokenizer/matrix", c.tokenizer.matrix()});
  a.arrays.push_back({"tokenizer/scale", DenseArray::scalar(c.tokenizer.scale())});
  return a;
}

/// Rebuilds a checkpoint; the array table must match the configured
/// architecture exactly (no missing, extra or reshaped entries).
inline Checkpoint from_archive(const Archive& a) {
  RunConfig cfg = parse_config(a.config_text);
  const DenoiserArch arch = cfg.arch();
  const auto layout = denoiser_layout(arch);

  std::set<std::string> expected;
  for (const char* prefix : {"model/", "ema/", "adam_m/", "adam_v/"})
    for (const auto& spec : layout) expected.insert(prefix + spec.name);
  expected.insert("tokenizer/matrix");
  expected.insert("tokenizer/scale");
  for (const auto& e : a.arrays)
    if (!expected.count(e.name)) throw FormatError("unknown array '" + e.name + "' in checkpoint");
  if (a.arrays.size() != expected.size()) throw FormatError("checkpoint is missing arrays");

  auto take = [&](const std::string& prefix) {
    ParameterSet set;
    for (const auto& spec : layout) {
      const DenseArray& arr = a.at(prefix + spec.name);
      if (arr.shape() != spec.shape)
        throw FormatError("array '" + prefix + spec.name + "' has shape " + shape_string(arr.shape()) + ", expected " +
                          shape_string(spec.shape));
      set.add(spec.name, arr);
    }
    return set;
  };
  DenoiserParameters params(arch, take("model/"));
  OptimizerState opt{take("adam_m/"), take("adam_v/"), a.step};
  EmaState ema{take("ema/"), cfg.train.ema_decay};
  Rng rng;
  rng.restore(a.rng_state);

  const DenseArray& scale = a.at("tokenizer/scale");
  if (scale.size() != 1) throw FormatError("tokenizer/scale must hold one value");
  LinearTokenizer tok(a.at("tokenizer/matrix"), scale[0]);
  if (tok.latent_dim() != cfg.latent_dim || tok.data_dim() != cfg.data.data_dim)
    throw FormatError("tokenizer shape does not match the configuration");
  return Checkpoint{std::move(cfg), TrainState{std::move(params), std::move(opt), std::move(ema), rng, a.epoch},
                    std::move(tok)};
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { write_archive(path, to_archive(c)); }
inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return from_archive(read_archive(path)); }

/// Latent cache: "latents/z", "latents/labels" (stored as floats), plus the
/// tokenizer that produced them.
inline Archive latent_cache(const LatentDataset& d, const LinearTokenizer& tok) {
  Archive a;
  DenseArray labels(Shape{d.size()});
  for (std::size_t i = 0; i < d.size(); ++i) labels[i] = static_cast<float>(d.labels[i].value);
  a.arrays.push_back({"latents/z", d.z});
  a.arrays.push_back({"latents/labels", std::move(labels)});
  a.arrays.push_back({"latents/classes", DenseArray::scalar(static_cast<float>(d.classes))});
  a.arrays.push_back({"tokenizer/matrix", tok.matrix()});
  a.arrays.push_back({"tokenizer/scale", DenseArray::scalar(tok.scale())});
  return a;
}

inline LatentDataset latents_from_cache(const Archive& a) {
  for (const auto& e : a.arrays)
    if (e.name.rfind("latents/", 0) != 0 && e.name.rfind("tokenizer/", 0) != 0)
      throw FormatError("unknown array '" + e.name + "' in latent cache");
  LatentDataset d;
  d.z = a.at("latents/z");
  const DenseArray& labels = a.at("latents/labels");
  if (labels.size() != d.z.rows()) throw FormatError("latent cache label count does not match rows");
  d.classes = static_cast<std::size_t>(a.at("latents/classes")[0]);
  for (float v : labels.values()) d.labels.push_back(Label{static_cast<std::size_t>(v)});
  return d;
}

}  // namespace sle
