#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "evicore/predict.hpp"
#include "evicore/preprocess.hpp"

namespace evicore::cli {

struct HeatmapCell {
  int origin_row = 0;
  int origin_col = 0;
  double prob_cancer = 0.5;
  double confidence = 0.0;
};

struct HeatmapGrid {
  int image_rows = 0;
  int image_cols = 0;
  int window_rows = 0;
  int window_cols = 0;
  std::vector<HeatmapCell> cells;

  /// Cells with confidence >= tau.
  std::vector<bool> retained(double tau) const;
  std::size_t retained_count(double tau) const;
};

/// Scores every sliding window over the whole frame (no ROI restriction). Windows that fail
/// normalization (flat signal) get prob 0.5 and confidence 0.
HeatmapGrid sliding_window_heatmap(Predictor& predictor, const preprocess::RfImage& image,
                                   const preprocess::PatchGrid& grid, preprocess::ResampleFactors factors);

/// RGB rendering: grayscale log-envelope background; pixels covered by retained cells are
/// tinted red (mean prob > 0.5) or blue, everything else left untinted.
void render_heatmap_png(const std::filesystem::path& path, const preprocess::RfImage& image, const HeatmapGrid& grid,
                        double tau);

void write_heatmap_csv(const std::filesystem::path& path, const HeatmapGrid& grid);

/// Share of retained cancer-called cells whose centre pixel lies in `region`; nullopt when no
/// such cell exists.
std::optional<double> cancer_region_overlap(const HeatmapGrid& grid, const Mask& region, double tau);

}  // namespace evicore::cli
