#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "evicore/preprocess.hpp"
#include "oracles.hpp"

using namespace evicore;
using namespace evicore::preprocess;

namespace {

RfImage frame(int rows, int cols, double sa, double sl, std::uint64_t seed = 0) {
  RfImage img;
  img.samples = Image(rows, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> z;
  for (auto& v : img.samples.values()) v = z(rng);
  img.axial_spacing_mm = sa;
  img.lateral_spacing_mm = sl;
  img.prostate_mask = Mask(rows, cols, 1);
  return img;
}

}  // namespace

TEST(NeedleRoi, MatchesDistanceOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    auto img = frame(60, 90, 0.1 + 0.2 * u(rng), 0.1 + 0.2 * u(rng));
    img.needle.angle_deg = -30 + 60 * u(rng);
    img.needle.entry_row = 60 * u(rng);
    img.needle.entry_col = 10 * u(rng);
    img.needle.half_width_mm = 0.5 + 2 * u(rng);
    const auto roi = needle_roi(img);
    const double th = img.needle.angle_deg * std::numbers::pi / 180;
    for (int r = 0; r < 60; ++r)
      for (int c = 0; c < 90; ++c) {
        const double y = r * img.axial_spacing_mm, x = c * img.lateral_spacing_mm;
        const double y0 = img.needle.entry_row * img.axial_spacing_mm, x0 = img.needle.entry_col * img.lateral_spacing_mm;
        const double along = (y - y0) * std::sin(th) + (x - x0) * std::cos(th);
        const double d = oracle::distance_to_line(y, x, y0, x0, th);
        if (std::abs(d - img.needle.half_width_mm) < 1e-9) continue;
        EXPECT_EQ(roi(r, c) != 0, along >= 0 && d <= img.needle.half_width_mm) << r << ',' << c;
      }
  }
}

TEST(NeedleRoi, RespectsMaskAndRejectsEmpty) {
  auto img = frame(40, 40, 0.2, 0.2);
  img.needle.entry_row = 20;
  for (int r = 0; r < 40; ++r)
    for (int c = 20; c < 40; ++c) img.prostate_mask(r, c) = 0;
  const auto roi = needle_roi(img);
  for (int r = 0; r < 40; ++r)
    for (int c = 20; c < 40; ++c) EXPECT_EQ(roi(r, c), 0);
  img.needle.entry_row = -100;
  EXPECT_THROW(needle_roi(img), EmptyRoiError);
}

TEST(Windows, CountMatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    auto img = frame(80 + t, 120 - t, 0.1 + 0.1 * u(rng), 0.1 + 0.1 * u(rng));
    img.needle.angle_deg = 40 * u(rng) - 20;
    img.needle.entry_row = 30 + 20 * u(rng);
    img.needle.half_width_mm = 1 + 2 * u(rng);
    PatchGrid grid{1.5 + 2 * u(rng), 0.9 * u(rng), 8, 8};
    const auto roi = needle_roi(img);
    const auto w = window_shape(img, grid);
    EXPECT_EQ(w.rows, std::lround(grid.patch_size_mm / img.axial_spacing_mm));
    EXPECT_EQ(extract_patches(img, &roi, grid).size(),
              oracle::window_count(roi, w.rows, w.cols, w.stride_rows, w.stride_cols));
  }
}

TEST(Windows, Examples) {
  auto img = frame(64, 64, 5.0 / 32, 5.0 / 32);
  PatchGrid grid{5.0, 0.0, 32, 32};
  auto w = window_shape(img, grid);
  EXPECT_EQ(w.rows, 32);
  EXPECT_EQ(w.stride_rows, 32);
  EXPECT_EQ(extract_patches(img, nullptr, grid).size(), 4u);
  grid.overlap_fraction = 0.9;
  w = window_shape(img, grid);
  EXPECT_EQ(w.stride_cols, 3);
  grid.overlap_fraction = 0.999;
  EXPECT_EQ(window_shape(img, grid).stride_rows, 1);
  const auto small = frame(16, 16, 5.0 / 32, 5.0 / 32);
  EXPECT_THROW(extract_patches(small, nullptr, PatchGrid{5.0, 0.0, 32, 32}), std::invalid_argument);
  const auto patches = extract_patches(img, nullptr, PatchGrid{5.0, 0.5, 32, 32});
  EXPECT_EQ(patches[1].origin_col, 16);
  EXPECT_FLOAT_EQ(patches[1].pixels(3, 4), img.samples(3, 20));
}

TEST(Resample, ShapeConstantAndRamp) {
  Image c(50, 10, 2.5f);
  auto out = resample_patch(c, {5, 5}, 16, 16);
  EXPECT_EQ(out.rows(), 16);
  EXPECT_EQ(out.cols(), 16);
  for (float v : out.values()) EXPECT_NEAR(v, 2.5f, 1e-5);

  // lateral ramp survives axial filtering and stays monotone after resizing
  Image ramp(40, 40);
  for (int r = 0; r < 40; ++r)
    for (int k = 0; k < 40; ++k) ramp(r, k) = static_cast<float>(k);
  out = resample_patch(ramp, {1, 1}, 20, 20);
  for (int r = 0; r < 20; ++r) {
    for (int k = 1; k < 20; ++k) EXPECT_GT(out(r, k), out(r, k - 1));
    EXPECT_NEAR(out(r, 0), 0.5, 1e-5);
  }
  // near-square input is center cropped, not stretched
  Image wide(32, 34);
  for (int r = 0; r < 32; ++r)
    for (int k = 0; k < 34; ++k) wide(r, k) = static_cast<float>(k);
  out = resample_patch(wide, {1, 1}, 32, 32);
  EXPECT_FLOAT_EQ(out(0, 0), 1.0f);
  EXPECT_FLOAT_EQ(out(0, 31), 32.0f);
}

TEST(Normalize, ExampleIdempotenceAndDegenerate) {
  Image p(2, 2, std::vector<float>{1, 2, 3, 4});
  const auto n = normalize_patch(p);
  EXPECT_NEAR(n(0, 0), -1.3416408, 1e-6);
  EXPECT_NEAR(n(0, 1), -0.4472136, 1e-6);
  EXPECT_NEAR(n(1, 1), 1.3416408, 1e-6);
  const auto n2 = normalize_patch(n);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(n2.values()[i], n.values()[i], 1e-6);
  EXPECT_THROW(normalize_patch(Image(4, 4, 3.0f)), DegeneratePatchError);
  EXPECT_THROW(normalize_patch(Image()), std::invalid_argument);
}

TEST(Pipeline, ProducesNormalizedPatchesOfRequestedSize) {
  auto img = frame(100, 100, 0.1, 0.1, 9);
  img.needle.entry_row = 50;
  img.needle.half_width_mm = 2.5;
  const auto out = process_image(img, {{2.0, 0.5, 12, 12}, {1, 1}, true});
  ASSERT_FALSE(out.empty());
  for (const auto& p : out) {
    EXPECT_EQ(p.pixels.rows(), 12);
    double m = 0;
    for (float v : p.pixels.values()) m += v;
    EXPECT_NEAR(m / p.pixels.size(), 0.0, 1e-5);
  }
}
