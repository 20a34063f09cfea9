#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "evicore/domain.hpp"

namespace evicore::preprocess {

class DegeneratePatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyRoiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Needle trace: a ray starting at the entry point, measured in pixel coordinates. Angle 0 runs
/// along the lateral (column) axis, positive angles tilt toward increasing depth (rows).
struct NeedleGeometry {
  double angle_deg = 0.0;
  double entry_row = 0.0;
  double entry_col = 0.0;
  double half_width_mm = 2.5;
  double length_mm = std::numeric_limits<double>::infinity();
};

struct RfImage {
  Image samples;  // axial samples x lateral lines
  double axial_spacing_mm = 1.0;
  double lateral_spacing_mm = 1.0;
  Mask prostate_mask;
  NeedleGeometry needle;

  void validate() const;
};

struct PatchGrid {
  double patch_size_mm = 5.0;
  double overlap_fraction = 0.9;
  int output_rows = 256;
  int output_cols = 256;

  void validate() const;
};

struct ResampleFactors {
  double lateral_up = 5.0;
  double axial_down = 5.0;
};

struct WindowShape {
  int rows = 0;
  int cols = 0;
  int stride_rows = 0;
  int stride_cols = 0;
};

struct RawPatch {
  Image pixels;
  int origin_row = 0;
  int origin_col = 0;
};

/// Band of points within half_width_mm of the needle ray (physical distance), intersected with
/// the prostate mask. Throws EmptyRoiError when nothing survives.
Mask needle_roi(const RfImage& image);

/// Window and stride sizes in pixels for the grid at the image's spacing.
WindowShape window_shape(const RfImage& image, const PatchGrid& grid);

/// Emits every grid window with at least half of its pixels inside the roi. An empty roi
/// pointer means "no ROI restriction" (every window is emitted).
std::vector<RawPatch> extract_patches(const RfImage& image, const Mask* roi, const PatchGrid& grid);

/// Anisotropic linear resampling with an axial box low-pass ahead of down-sampling, then a
/// center crop (near-square results) or bilinear resize to the output size.
Image resample_patch(const Image& raw, ResampleFactors factors, int output_rows, int output_cols);

/// Zero mean, unit population standard deviation. Throws DegeneratePatchError when std < 1e-8.
Image normalize_patch(const Image& patch);

struct PipelineConfig {
  PatchGrid grid;
  ResampleFactors factors;
  bool restrict_to_roi = true;
};

struct ProcessedPatch {
  Image pixels;
  int origin_row = 0;
  int origin_col = 0;
};

/// ROI -> windows -> resample -> normalize. Degenerate windows are dropped.
std::vector<ProcessedPatch> process_image(const RfImage& image, const PipelineConfig& config);

}  // namespace evicore::preprocess
