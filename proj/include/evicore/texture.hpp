#pragma once

#include <cstdint>
#include <random>

#include "evicore/domain.hpp"

namespace evicore::synth {

using Rng = std::mt19937_64;

enum class Tissue { benign, cancer, ood };

/// Gaussian-correlated random field parameters. Correlation lengths are in pixels.
struct FieldParams {
  double sigma_axial = 1.0;
  double sigma_lateral = 1.0;
  double speckle = 0.0;  // fraction of power carried by uncorrelated noise
};

/// Class-conditional texture families. Benign tissue is an isotropic fine-grained field; cancer
/// tissue is elongated along the axial direction by a factor (1 + class_separation). OOD tissue
/// is coarse in both directions: its lateral correlation length matches neither class. Each rendered patch draws its correlation lengths
/// with log-normal jitter, so the classes overlap.
class TextureModel {
 public:
  explicit TextureModel(double class_separation, double jitter = 0.15, double speckle = 0.2);

  FieldParams nominal(Tissue tissue) const;
  FieldParams draw(Tissue tissue, Rng& rng) const;

  /// Unnormalized field with roughly unit variance.
  Image render(Tissue tissue, int rows, int cols, Rng& rng) const;

  double class_separation() const { return separation_; }

 private:
  double separation_;
  double jitter_;
  double speckle_;
};

/// Gaussian-filtered white noise with unit marginal variance.
Image gaussian_field(const FieldParams& params, int rows, int cols, Rng& rng);

/// Per-stream generator derived from a master seed and a stream index.
Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0);

}  // namespace evicore::synth
