#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "evicore/domain.hpp"
#include "evicore/preprocess.hpp"
#include "evicore/texture.hpp"

namespace evicore::synth {

struct InvolvementDistribution {
  enum class Kind { fixed, uniform, beta };
  Kind kind = Kind::fixed;
  double a = 0.7;  // fixed: value; uniform: low; beta: alpha
  double b = 0.7;  // uniform: high; beta: beta

  static InvolvementDistribution fixed(double v) { return {Kind::fixed, v, v}; }
  static InvolvementDistribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static InvolvementDistribution beta(double alpha, double beta) { return {Kind::beta, alpha, beta}; }

  void validate() const;
  double sample(Rng& rng) const;
};

struct SynthConfig {
  int n_patients = 20;
  int cores_per_patient = 10;
  int patches_per_core = 32;
  double cancer_core_fraction = 0.5;
  InvolvementDistribution involvement;
  double ood_fraction = 0.0;
  double class_separation = 1.0;
  double texture_jitter = 0.15;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cancer cores hold a contiguous run of round(v * n) cancer patches (the rest benign), all
/// weakly labelled cancer. Benign cores hold round(ood_fraction * n) OOD patches at random
/// positions, the rest benign. Patches are normalized. Ground truth goes to the oracle view.
Dataset generate_dataset(const SynthConfig& config);

/// Keeps benign cores and cancer cores with involvement >= min_involvement.
std::vector<BiopsyCore> filter_by_involvement(std::vector<BiopsyCore> cores, double min_involvement = 0.4);

/// Uniformly under-samples the majority class to the minority count. Order is preserved.
std::vector<BiopsyCore> balance_cores(std::vector<BiopsyCore> cores, std::uint64_t seed);

struct Split {
  std::vector<BiopsyCore> train;
  std::vector<BiopsyCore> val;
  std::vector<BiopsyCore> test;
};

Split split_by_patient(const std::vector<BiopsyCore>& cores, std::array<double, 3> fractions,
                       std::uint64_t seed);

struct RfSceneConfig {
  int axial_samples = 160;
  int lateral_lines = 320;
  double spacing_mm = 5.0 / 32.0;  // isotropic; 32 px per 5 mm window
  double class_separation = 1.0;
  double texture_jitter = 0.15;
  Label core_label = Label::cancer;
  double lesion_length_fraction = 0.4;  // fraction of the needle path inside the prostate
  std::uint64_t seed = 0;
};

struct RfScene {
  preprocess::RfImage image;
  Mask cancer_region;  // oracle: pixels rendered with the cancer texture
};

/// Whole synthetic frame: benign texture everywhere, plus for cancer scenes a lesion centred
/// on a contiguous stretch of the needle path. Spacing is isotropic so resample factors of 1
/// reproduce the patch generator's statistics.
RfScene generate_rf_scene(const RfSceneConfig& config);

}  // namespace evicore::synth
