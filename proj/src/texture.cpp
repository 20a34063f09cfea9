#include "evicore/texture.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace evicore::synth {

Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += k[i + radius] * k[i + radius];
  }
  // unit L2 norm keeps the filtered white noise at unit variance
  for (double& v : k) v /= std::sqrt(norm);
  return k;
}

}  // namespace

Image gaussian_field(const FieldParams& params, int rows, int cols, Rng& rng) {
  const auto ka = gaussian_kernel(params.sigma_axial);
  const auto kl = gaussian_kernel(params.sigma_lateral);
  const int ra = static_cast<int>(ka.size() / 2);
  const int rl = static_cast<int>(kl.size() / 2);
  const int pr = rows + 2 * ra;
  const int pc = cols + 2 * rl;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(pr) * pc);
  for (double& v : noise) v = normal(rng);

  // axial pass: (pr x pc) -> (rows x pc)
  std::vector<double> tmp(static_cast<std::size_t>(rows) * pc, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < static_cast<int>(ka.size()); ++k) {
      const double w = ka[k];
      const double* src = &noise[static_cast<std::size_t>(r + k) * pc];
      double* dst = &tmp[static_cast<std::size_t>(r) * pc];
      for (int c = 0; c < pc; ++c) dst[c] += w * src[c];
    }

  const double smooth = std::sqrt(1.0 - params.speckle);
  const double white = std::sqrt(params.speckle);
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < static_cast<int>(kl.size()); ++k) acc += kl[k] * tmp[static_cast<std::size_t>(r) * pc + c + k];
      out(r, c) = static_cast<float>(smooth * acc + (params.speckle > 0.0 ? white * normal(rng) : 0.0));
    }
  return out;
}

TextureModel::TextureModel(double class_separation, double jitter, double speckle)
    : separation_(class_separation), jitter_(jitter), speckle_(speckle) {
  if (!(class_separation >= 0.0)) throw std::invalid_argument("class_separation must be nonnegative");
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be nonnegative");
  if (!(speckle >= 0.0 && speckle < 1.0)) throw std::invalid_argument("speckle must lie in [0, 1)");
}

FieldParams TextureModel::nominal(Tissue tissue) const {
  constexpr double base = 0.8;
  switch (tissue) {
    case Tissue::benign:
      return {base, base, speckle_};
    case Tissue::cancer:
      return {base * (1.0 + separation_), base, speckle_};
    case Tissue::ood:
      return {base * (1.0 + separation_), base * (1.0 + separation_), speckle_};
  }
  throw std::invalid_argument("unknown tissue");
}

FieldParams TextureModel::draw(Tissue tissue, Rng& rng) const {
  FieldParams p = nominal(tissue);
  std::normal_distribution<double> normal(0.0, jitter_);
  p.sigma_axial *= std::exp(normal(rng));
  p.sigma_lateral *= std::exp(normal(rng));
  return p;
}

Image TextureModel::render(Tissue tissue, int rows, int cols, Rng& rng) const {
  return gaussian_field(draw(tissue, rng), rows, cols, rng);
}

}  // namespace evicore::synth
