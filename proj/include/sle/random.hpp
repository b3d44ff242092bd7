#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>

#include "sle/errors.hpp"

namespace sle {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seeded random stream. The full state (engine plus the cached normal
/// variate) round-trips through state()/restore(), which is what training
/// checkpoints persist.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(detail::splitmix64(seed)) {}

  /// Independent stream keyed by (seed, keys...). Same keys, same stream.
  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = detail::splitmix64(seed);
    for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632BE59BD9B4E019ULL));
    Rng rng;
    rng.engine_.seed(h);
    return rng;
  }

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  double normal() { return normal_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() noexcept { return engine_; }

  std::string state() const {
    std::ostringstream os;
    os << engine_ << ' ' << normal_;
    return os.str();
  }

  void restore(const std::string& text) {
    std::istringstream is(text);
    std::mt19937_64 engine;
    std::normal_distribution<double> normal;
    is >> engine >> normal;
    if (is.fail()) throw FormatError("rng state is not parseable");
    engine_ = engine;
    normal_ = normal;
    uniform_.reset();
  }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.normal_ == b.normal_;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sle
