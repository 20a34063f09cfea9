#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "evicore/array_io.hpp"
#include "evicore/dataset_io.hpp"
#include "evicore/frame_io.hpp"
#include "evicore/synthgen.hpp"

using namespace evicore;
using namespace evicore::synth;
namespace fs = std::filesystem;

namespace {

SynthConfig small(double v, int n = 10) {
  SynthConfig c;
  c.n_patients = 4;
  c.cores_per_patient = 5;
  c.patches_per_core = n;
  c.height = c.width = 16;
  c.involvement = InvolvementDistribution::fixed(v);
  c.seed = 3;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Domain, CoreValidation) {
  EXPECT_THROW(BiopsyCore("a", "p", Label::cancer, 0.5, {}), std::invalid_argument);
  EXPECT_THROW(BiopsyCore("a", "p", Label::cancer, 1.5, {Image(2, 2)}), std::invalid_argument);
  EXPECT_THROW(BiopsyCore("a", "p", Label::benign, 0.3, {Image(2, 2)}), std::invalid_argument);
  BiopsyCore c("a", "p", Label::cancer, 0.5, {Image(2, 2), Image(2, 2)});
  EXPECT_EQ(c.size(), 2u);
  for (const auto& p : c.patches()) EXPECT_EQ(p.weak_label, Label::cancer);
}

TEST(Synth, ZeroNoiseAtFullInvolvement) {
  const auto ds = generate_dataset(small(1.0));
  for (const auto& core : ds.cores)
    for (const auto& t : ds.oracle.core(core.core_id())) EXPECT_EQ(t.true_label, core.weak_label());
}

TEST(Synth, InvolvementCountsAndContiguity) {
  const auto ds = generate_dataset(small(0.4));
  int cancer_cores = 0;
  for (const auto& core : ds.cores) {
    const auto& truth = ds.oracle.core(core.core_id());
    int pos = 0, runs = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      pos += to_int(truth[k].true_label);
      if (truth[k].true_label == Label::cancer && (k == 0 || truth[k - 1].true_label == Label::benign)) ++runs;
    }
    if (core.weak_label() == Label::cancer) {
      ++cancer_cores;
      EXPECT_EQ(pos, 4);
      EXPECT_EQ(runs, 1);
    } else {
      EXPECT_EQ(pos, 0);
    }
  }
  EXPECT_EQ(cancer_cores, 10);
}

TEST(Synth, OodOnlyInBenignCores) {
  auto cfg = small(0.7);
  cfg.ood_fraction = 0.2;
  const auto ds = generate_dataset(cfg);
  for (const auto& core : ds.cores) {
    int ood = 0;
    for (const auto& t : ds.oracle.core(core.core_id())) ood += t.is_ood;
    EXPECT_EQ(ood, core.weak_label() == Label::benign ? 2 : 0);
  }
}

TEST(Synth, DeterministicInSeed) {
  const auto a = generate_dataset(small(0.7)), b = generate_dataset(small(0.7));
  auto c_cfg = small(0.7);
  c_cfg.seed = 4;
  const auto c = generate_dataset(c_cfg);
  EXPECT_EQ(a.cores[3].patches()[2].pixels, b.cores[3].patches()[2].pixels);
  EXPECT_NE(a.cores[3].patches()[2].pixels, c.cores[3].patches()[2].pixels);
}

TEST(Synth, FilterBalanceSplit) {
  auto cfg = small(0.7);
  cfg.involvement = InvolvementDistribution::uniform(0.1, 1.0);
  cfg.cancer_core_fraction = 0.7;
  auto cores = generate_dataset(cfg).cores;
  const auto filtered = filter_by_involvement(cores, 0.4);
  for (const auto& c : filtered)
    if (c.weak_label() == Label::cancer) EXPECT_GE(c.involvement(), 0.4);
  const auto balanced = balance_cores(filtered, 1);
  int pos = 0;
  for (const auto& c : balanced) pos += to_int(c.weak_label());
  EXPECT_EQ(2 * pos, static_cast<int>(balanced.size()));

  const auto split = split_by_patient(cores, {0.5, 0.25, 0.25}, 2);
  std::set<std::string> tr, va, te;
  for (const auto& c : split.train) tr.insert(c.patient_id());
  for (const auto& c : split.val) va.insert(c.patient_id());
  for (const auto& c : split.test) te.insert(c.patient_id());
  EXPECT_EQ(tr.size(), 2u);
  EXPECT_EQ(va.size(), 1u);
  EXPECT_EQ(te.size(), 1u);
  for (const auto& p : va) EXPECT_FALSE(tr.count(p) || te.count(p));
  EXPECT_EQ(split.train.size() + split.val.size() + split.test.size(), cores.size());
  EXPECT_THROW(split_by_patient(cores, {0.5, 0.5, 0.5}, 2), std::invalid_argument);

  std::vector<BiopsyCore> benign_only;
  for (const auto& c : cores)
    if (c.weak_label() == Label::benign) benign_only.push_back(c);
  EXPECT_THROW(balance_cores(benign_only, 1), std::invalid_argument);
}

TEST(Io, DatasetRoundTrip) {
  auto cfg = small(0.7, 6);
  cfg.ood_fraction = 0.5;
  const auto ds = generate_dataset(cfg);
  const auto dir = temp_dir("evicore_ds_test");
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.cores.size(), ds.cores.size());
  for (std::size_t i = 0; i < ds.cores.size(); ++i) {
    EXPECT_EQ(back.cores[i].core_id(), ds.cores[i].core_id());
    EXPECT_EQ(back.cores[i].patient_id(), ds.cores[i].patient_id());
    EXPECT_EQ(back.cores[i].weak_label(), ds.cores[i].weak_label());
    EXPECT_DOUBLE_EQ(back.cores[i].involvement(), ds.cores[i].involvement());
    for (std::size_t k = 0; k < ds.cores[i].size(); ++k)
      EXPECT_EQ(back.cores[i].patches()[k].pixels, ds.cores[i].patches()[k].pixels);
    const auto& a = ds.oracle.core(ds.cores[i].core_id());
    const auto& b = back.oracle.core(ds.cores[i].core_id());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].true_label, b[k].true_label);
      EXPECT_EQ(a[k].is_ood, b[k].is_ood);
    }
  }
  fs::remove_all(dir);
  EXPECT_THROW(read_dataset(dir), std::runtime_error);
}

TEST(Io, ImageStackRejectsTruncation) {
  const auto dir = temp_dir("evicore_stack_test");
  fs::create_directories(dir);
  Image img(3, 5);
  for (std::size_t i = 0; i < img.size(); ++i) img.values()[i] = static_cast<float>(i) - 4.5f;
  write_image(dir / "a.bin", img);
  EXPECT_EQ(read_image(dir / "a.bin"), img);
  fs::resize_file(dir / "a.bin", fs::file_size(dir / "a.bin") - 4);
  EXPECT_THROW(read_image(dir / "a.bin"), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Io, FrameRoundTrip) {
  RfSceneConfig sc;
  sc.axial_samples = 64;
  sc.lateral_lines = 96;
  sc.seed = 2;
  const auto scene = generate_rf_scene(sc);
  std::size_t lesion = 0;
  for (auto v : scene.cancer_region.values()) lesion += v;
  EXPECT_GT(lesion, 0u);
  const auto dir = temp_dir("evicore_frame_test");
  write_frame(dir, {scene.image, "f1", "p1", Label::cancer, 0.4, scene.cancer_region});
  const auto back = read_frame(dir);
  EXPECT_EQ(back.image.samples, scene.image.samples);
  EXPECT_EQ(back.image.prostate_mask, scene.image.prostate_mask);
  EXPECT_EQ(*back.cancer_region, scene.cancer_region);
  EXPECT_DOUBLE_EQ(back.image.needle.angle_deg, scene.image.needle.angle_deg);
  EXPECT_EQ(back.weak_label, Label::cancer);
  fs::remove_all(dir);
}
