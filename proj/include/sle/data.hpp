#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sle/denoiser.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/random.hpp"
#include "sle/tokenizer.hpp"

namespace sle {

struct MixtureDatasetConfig {
  std::size_t classes = 8;
  std::size_t data_dim = 32;
  std::size_t n_per_class = 2000;
  double spread = 0.5;
  double radius = 4.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw ConfigError("mixture needs at least 2 classes");
    if (data_dim < 2) throw ConfigError("mixture needs data_dim >= 2");
    if (n_per_class == 0) throw ConfigError("mixture needs n_per_class >= 1");
    if (!(spread > 0.0)) throw ConfigError("mixture spread must be positive");
    if (!(radius > 0.0)) throw ConfigError("mixture radius must be positive");
  }
};

struct LabeledDataset {
  DenseArray x;  // [n, data_dim]
  std::vector<Label> labels;
  DenseArray means;  // [classes, data_dim]
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Gaussian mixture: class k has mean on the radius sphere (direction drawn
/// from the seed) and isotropic spread. Rows are grouped by class.
inline LabeledDataset make_mixture(const MixtureDatasetConfig& cfg) {
  cfg.validate();
  LabeledDataset ds;
  ds.classes = cfg.classes;
  ds.means = DenseArray::matrix(cfg.classes, cfg.data_dim);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    Rng rng = Rng::substream(cfg.seed, {0x3EA7u, k});
    std::vector<double> dir(cfg.data_dim);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& d : dir) {
        d = rng.normal();
        norm2 += d * d;
      }
    } while (norm2 == 0.0);
    const double f = cfg.radius / std::sqrt(norm2);
    for (std::size_t i = 0; i < cfg.data_dim; ++i) ds.means.at(k, i) = static_cast<float>(dir[i] * f);
  }

  const std::size_t n = cfg.classes * cfg.n_per_class;
  ds.x = DenseArray::matrix(n, cfg.data_dim);
  ds.labels.reserve(n);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    Rng rng = Rng::substream(cfg.seed, {0x5A3Cu, k});
    for (std::size_t j = 0; j < cfg.n_per_class; ++j) {
      auto row = ds.x.row(k * cfg.n_per_class + j);
      for (std::size_t i = 0; i < cfg.data_dim; ++i)
        row[i] = static_cast<float>(ds.means.at(k, i) + cfg.spread * rng.normal());
      ds.labels.push_back(Label{k});
    }
  }
  return ds;
}

/// Index of the closest class mean (squared Euclidean distance).
inline std::size_t nearest_mean(std::span<const float> x, const DenseArray& means) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t k = 0; k < means.rows(); ++k) {
    auto m = means.row(k);
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = static_cast<double>(x[i]) - m[i];
      d += t * t;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

struct LatentDataset {
  DenseArray z;  // [n, latent_dim]
  std::vector<Label> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

/// The tokenizer with its scale calibrated on this dataset (unit mean-square latents).
inline LinearTokenizer calibrated_tokenizer(const LabeledDataset& ds, const LinearTokenizer& tok) {
  const LinearTokenizer raw = tok.with_scale(1.0f);
  return raw.with_scale(calibrate_scale(raw.encode(ds.x)));
}

/// Encodes every row with tok as given (callers calibrate first).
inline LatentDataset precompute_latents(const LabeledDataset& ds, const LinearTokenizer& tok) {
  if (ds.x.cols() != tok.data_dim())
    throw ContractError("precompute_latents: data dim " + std::to_string(ds.x.cols()) + " does not match tokenizer " +
                        std::to_string(tok.data_dim()));
  return LatentDataset{tok.encode(ds.x), ds.labels, ds.classes};
}

}  // namespace sle
