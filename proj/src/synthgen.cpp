#include "evicore/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace evicore::synth {

void InvolvementDistribution::validate() const {
  switch (kind) {
    case Kind::fixed:
      if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("fixed involvement must lie in [0, 1]");
      break;
    case Kind::uniform:
      if (!(a >= 0.0 && b <= 1.0 && a <= b))
        throw std::invalid_argument("uniform involvement support must lie in [0, 1]");
      break;
    case Kind::beta:
      if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("beta involvement parameters must be positive");
      break;
  }
}

double InvolvementDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::fixed:
      return a;
    case Kind::uniform:
      return std::uniform_real_distribution<double>(a, b)(rng);
    case Kind::beta: {
      const double x = std::gamma_distribution<double>(a, 1.0)(rng);
      const double y = std::gamma_distribution<double>(b, 1.0)(rng);
      return x / (x + y);
    }
  }
  return a;
}

void SynthConfig::validate() const {
  if (n_patients <= 0) throw std::invalid_argument("n_patients must be positive");
  if (cores_per_patient <= 0) throw std::invalid_argument("cores_per_patient must be positive");
  if (patches_per_core <= 0) throw std::invalid_argument("patches_per_core must be positive");
  if (!(cancer_core_fraction >= 0.0 && cancer_core_fraction <= 1.0))
    throw std::invalid_argument("cancer_core_fraction must lie in [0, 1]");
  if (!(ood_fraction >= 0.0 && ood_fraction < 1.0)) throw std::invalid_argument("ood_fraction must lie in [0, 1)");
  if (height <= 0 || width <= 0) throw std::invalid_argument("image size must be positive");
  involvement.validate();
}

namespace {

std::string patient_name(int p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03d", p);
  return buf;
}

std::string core_name(int p, int c) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "p%03d_c%02d", p, c);
  return buf;
}

}  // namespace

Dataset generate_dataset(const SynthConfig& config) {
  config.validate();
  const TextureModel texture(config.class_separation, config.texture_jitter);
  const int n_cores = config.n_patients * config.cores_per_patient;
  const int n = config.patches_per_core;

  // exact class counts: a seeded subset of core indices is cancerous
  std::vector<int> order(n_cores);
  std::iota(order.begin(), order.end(), 0);
  Rng master = substream(config.seed, 0, 1);
  std::shuffle(order.begin(), order.end(), master);
  const auto n_cancer_cores = static_cast<int>(std::lround(config.cancer_core_fraction * n_cores));
  std::vector<bool> is_cancer(n_cores, false);
  for (int i = 0; i < n_cancer_cores; ++i) is_cancer[order[i]] = true;

  Dataset ds;
  ds.cores.reserve(n_cores);
  for (int p = 0; p < config.n_patients; ++p) {
    for (int c = 0; c < config.cores_per_patient; ++c) {
      const int index = p * config.cores_per_patient + c;
      Rng rng = substream(config.seed, static_cast<std::uint64_t>(index) + 1, 2);

      std::vector<Tissue> tissue(n, Tissue::benign);
      double involvement = 0.0;
      Label weak = Label::benign;
      if (is_cancer[index]) {
        weak = Label::cancer;
        involvement = config.involvement.sample(rng);
        const int n_pos = static_cast<int>(std::lround(involvement * n));
        const int start = std::uniform_int_distribution<int>(0, n - n_pos)(rng);
        std::fill(tissue.begin() + start, tissue.begin() + start + n_pos, Tissue::cancer);
      } else {
        const int n_ood = static_cast<int>(std::lround(config.ood_fraction * n));
        std::vector<int> slots(n);
        std::iota(slots.begin(), slots.end(), 0);
        std::shuffle(slots.begin(), slots.end(), rng);
        for (int k = 0; k < n_ood; ++k) tissue[slots[k]] = Tissue::ood;
      }

      std::vector<Image> pixels;
      std::vector<PatchTruth> truth;
      pixels.reserve(n);
      truth.reserve(n);
      for (int k = 0; k < n; ++k) {
        // one retry covers the (practically impossible) constant-field draw
        for (int attempt = 0;; ++attempt) {
          try {
            pixels.push_back(preprocess::normalize_patch(texture.render(tissue[k], config.height, config.width, rng)));
            break;
          } catch (const preprocess::DegeneratePatchError&) {
            if (attempt > 3) throw;
          }
        }
        truth.push_back({tissue[k] == Tissue::cancer ? Label::cancer : Label::benign, tissue[k] == Tissue::ood});
      }
      const std::string id = core_name(p, c);
      ds.oracle.add(id, std::move(truth));
      ds.cores.emplace_back(id, patient_name(p), weak, involvement, std::move(pixels));
    }
  }
  return ds;
}

std::vector<BiopsyCore> filter_by_involvement(std::vector<BiopsyCore> cores, double min_involvement) {
  std::vector<BiopsyCore> out;
  out.reserve(cores.size());
  for (auto& core : cores)
    if (core.weak_label() == Label::benign || core.involvement() >= min_involvement) out.push_back(std::move(core));
  return out;
}

std::vector<BiopsyCore> balance_cores(std::vector<BiopsyCore> cores, std::uint64_t seed) {
  std::vector<std::size_t> benign, cancer;
  for (std::size_t i = 0; i < cores.size(); ++i)
    (cores[i].weak_label() == Label::cancer ? cancer : benign).push_back(i);
  if (benign.empty() || cancer.empty()) throw std::invalid_argument("balance_cores: both classes must be present");

  auto& major = benign.size() > cancer.size() ? benign : cancer;
  const auto& minor = benign.size() > cancer.size() ? cancer : benign;
  std::vector<std::size_t> kept_major;
  Rng rng = substream(seed, 0, 3);
  std::sample(major.begin(), major.end(), std::back_inserter(kept_major), minor.size(), rng);

  std::vector<bool> keep(cores.size(), false);
  for (auto i : minor) keep[i] = true;
  for (auto i : kept_major) keep[i] = true;
  std::vector<BiopsyCore> out;
  out.reserve(2 * minor.size());
  for (std::size_t i = 0; i < cores.size(); ++i)
    if (keep[i]) out.push_back(std::move(cores[i]));
  return out;
}

Split split_by_patient(const std::vector<BiopsyCore>& cores, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");

  std::vector<std::string> patients;
  for (const auto& core : cores)
    if (std::find(patients.begin(), patients.end(), core.patient_id()) == patients.end())
      patients.push_back(core.patient_id());
  Rng rng = substream(seed, 0, 4);
  std::shuffle(patients.begin(), patients.end(), rng);

  const auto total = static_cast<long>(patients.size());
  const long n_train = std::min(total, std::lround(fractions[0] * total));
  const long n_val = std::min(total - n_train, std::lround(fractions[1] * total));
  std::map<std::string, int> which;
  for (long i = 0; i < total; ++i) which[patients[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

  Split split;
  for (const auto& core : cores) {
    switch (which[core.patient_id()]) {
      case 0: split.train.push_back(core); break;
      case 1: split.val.push_back(core); break;
      default: split.test.push_back(core); break;
    }
  }
  return split;
}

RfScene generate_rf_scene(const RfSceneConfig& config) {
  if (config.axial_samples <= 0 || config.lateral_lines <= 0) throw std::invalid_argument("scene size must be positive");
  if (!(config.spacing_mm > 0.0)) throw std::invalid_argument("scene spacing must be positive");
  const int rows = config.axial_samples;
  const int cols = config.lateral_lines;
  const TextureModel texture(config.class_separation, config.texture_jitter);
  Rng rng = substream(config.seed, 0, 5);

  RfScene scene;
  auto& img = scene.image;
  img.axial_spacing_mm = img.lateral_spacing_mm = config.spacing_mm;

  // prostate: ellipse filling most of the frame
  img.prostate_mask = Mask(rows, cols, 0);
  const double cy = 0.5 * rows, cx = 0.5 * cols, ay = 0.46 * rows, ax = 0.47 * cols;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double u = (r - cy) / ay, v = (c - cx) / ax;
      img.prostate_mask(r, c) = (u * u + v * v) <= 1.0 ? 1 : 0;
    }

  // needle enters from the left edge, tilted slightly toward depth
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  img.needle.angle_deg = 5.0 + 10.0 * unif(rng);
  img.needle.entry_col = 0.0;
  img.needle.entry_row = rows * (0.3 + 0.15 * unif(rng));
  img.needle.half_width_mm = 2.5;

  scene.cancer_region = Mask(rows, cols, 0);
  if (config.core_label == Label::cancer) {
    const double theta = img.needle.angle_deg * std::numbers::pi / 180.0;
    const double path = cols / std::cos(theta);
    const double len = config.lesion_length_fraction * path;
    const double start = (0.2 + (0.8 - config.lesion_length_fraction) * unif(rng)) * path;
    const double mid = start + 0.5 * len;
    const double my = img.needle.entry_row + mid * std::sin(theta);
    const double mx = img.needle.entry_col + mid * std::cos(theta);
    const double half_len = 0.5 * len;
    const double half_w = 1.6 * img.needle.half_width_mm / config.spacing_mm;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double y = r - my, x = c - mx;
        const double along = y * std::sin(theta) + x * std::cos(theta);
        const double across = -y * std::cos(theta) + x * std::sin(theta);
        const double u = along / half_len, v = across / half_w;
        scene.cancer_region(r, c) = (u * u + v * v) <= 1.0 ? 1 : 0;
      }
  }

  const Image benign = gaussian_field(texture.draw(Tissue::benign, rng), rows, cols, rng);
  const Image cancer = gaussian_field(texture.draw(Tissue::cancer, rng), rows, cols, rng);
  img.samples = Image(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) img.samples(r, c) = scene.cancer_region(r, c) ? cancer(r, c) : benign(r, c);
  return scene;
}

}  // namespace evicore::synth
