#include "evicore/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace evicore::preprocess {

void RfImage::validate() const {
  if (samples.empty()) throw std::invalid_argument("RfImage: empty samples");
  if (prostate_mask.rows() != samples.rows() || prostate_mask.cols() != samples.cols())
    throw std::invalid_argument("RfImage: mask shape differs from samples shape");
  if (!(axial_spacing_mm > 0.0) || !(lateral_spacing_mm > 0.0))
    throw std::invalid_argument("RfImage: spacings must be positive");
  if (!(needle.half_width_mm > 0.0)) throw std::invalid_argument("RfImage: needle half width must be positive");
}

void PatchGrid::validate() const {
  if (!(patch_size_mm > 0.0)) throw std::invalid_argument("PatchGrid: patch size must be positive");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw std::invalid_argument("PatchGrid: overlap fraction must lie in [0, 1)");
  if (output_rows <= 0 || output_cols <= 0) throw std::invalid_argument("PatchGrid: output size must be positive");
}

Mask needle_roi(const RfImage& image) {
  image.validate();
  const auto& g = image.needle;
  const double theta = g.angle_deg * std::numbers::pi / 180.0;
  // direction in physical (axial, lateral) millimetres
  const double dy = std::sin(theta);
  const double dx = std::cos(theta);
  const double y0 = g.entry_row * image.axial_spacing_mm;
  const double x0 = g.entry_col * image.lateral_spacing_mm;

  Mask roi(image.samples.rows(), image.samples.cols(), 0);
  std::size_t count = 0;
  for (int r = 0; r < roi.rows(); ++r) {
    const double y = r * image.axial_spacing_mm - y0;
    for (int c = 0; c < roi.cols(); ++c) {
      if (!image.prostate_mask(r, c)) continue;
      const double x = c * image.lateral_spacing_mm - x0;
      const double along = y * dy + x * dx;
      const double across = std::abs(-y * dx + x * dy);
      if (along >= 0.0 && along <= g.length_mm && across <= g.half_width_mm) {
        roi(r, c) = 1;
        ++count;
      }
    }
  }
  if (count == 0) throw EmptyRoiError("needle ROI is empty (needle outside image or mask)");
  return roi;
}

WindowShape window_shape(const RfImage& image, const PatchGrid& grid) {
  grid.validate();
  WindowShape w;
  w.rows = static_cast<int>(std::lround(grid.patch_size_mm / image.axial_spacing_mm));
  w.cols = static_cast<int>(std::lround(grid.patch_size_mm / image.lateral_spacing_mm));
  if (w.rows < 1 || w.cols < 1) throw std::invalid_argument("patch window rounds to zero pixels");
  const double keep = 1.0 - grid.overlap_fraction;
  w.stride_rows = std::max(1, static_cast<int>(std::lround(w.rows * keep)));
  w.stride_cols = std::max(1, static_cast<int>(std::lround(w.cols * keep)));
  return w;
}

std::vector<RawPatch> extract_patches(const RfImage& image, const Mask* roi, const PatchGrid& grid) {
  image.validate();
  const WindowShape win = window_shape(image, grid);
  const int rows = image.samples.rows();
  const int cols = image.samples.cols();
  if (win.rows > rows || win.cols > cols) throw std::invalid_argument("patch window larger than image");
  if (roi && (roi->rows() != rows || roi->cols() != cols))
    throw std::invalid_argument("roi shape differs from image shape");

  // summed-area table of the roi
  std::vector<long> sat;
  if (roi) {
    sat.assign(static_cast<std::size_t>(rows + 1) * (cols + 1), 0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        sat[(r + 1) * (cols + 1) + c + 1] = (*roi)(r, c) + sat[r * (cols + 1) + c + 1] +
                                            sat[(r + 1) * (cols + 1) + c] - sat[r * (cols + 1) + c];
  }
  auto inside = [&](int r0, int c0) {
    const int r1 = r0 + win.rows, c1 = c0 + win.cols;
    return sat[r1 * (cols + 1) + c1] - sat[r0 * (cols + 1) + c1] - sat[r1 * (cols + 1) + c0] +
           sat[r0 * (cols + 1) + c0];
  };

  const long area = static_cast<long>(win.rows) * win.cols;
  std::vector<RawPatch> out;
  for (int r0 = 0; r0 + win.rows <= rows; r0 += win.stride_rows) {
    for (int c0 = 0; c0 + win.cols <= cols; c0 += win.stride_cols) {
      if (roi && 2 * inside(r0, c0) < area) continue;
      RawPatch p{Image(win.rows, win.cols), r0, c0};
      for (int r = 0; r < win.rows; ++r)
        for (int c = 0; c < win.cols; ++c) p.pixels(r, c) = image.samples(r0 + r, c0 + c);
      out.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

// Linear resampling of one axis; src = (dst + 0.5) * scale - 0.5, clamped to the edges.
Image resample_axis(const Image& in, int new_len, bool along_rows) {
  const int old_len = along_rows ? in.rows() : in.cols();
  const double scale = static_cast<double>(old_len) / new_len;
  Image out = along_rows ? Image(new_len, in.cols()) : Image(in.rows(), new_len);
  for (int i = 0; i < new_len; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(old_len - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, old_len - 1);
    const double t = src - i0;
    if (along_rows) {
      for (int c = 0; c < in.cols(); ++c)
        out(i, c) = static_cast<float>((1.0 - t) * in(i0, c) + t * in(i1, c));
    } else {
      for (int r = 0; r < in.rows(); ++r)
        out(r, i) = static_cast<float>((1.0 - t) * in(r, i0) + t * in(r, i1));
    }
  }
  return out;
}

// Centered moving average along rows with edge replication.
Image box_lowpass_rows(const Image& in, int width) {
  if (width <= 1) return in;
  const int half = width / 2;
  Image out(in.rows(), in.cols());
  for (int r = 0; r < in.rows(); ++r) {
    for (int c = 0; c < in.cols(); ++c) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += in(std::clamp(r + k, 0, in.rows() - 1), c);
      out(r, c) = static_cast<float>(acc / (2 * half + 1));
    }
  }
  return out;
}

Image center_crop(const Image& in, int rows, int cols) {
  const int r0 = (in.rows() - rows) / 2;
  const int c0 = (in.cols() - cols) / 2;
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = in(r0 + r, c0 + c);
  return out;
}

}  // namespace

Image resample_patch(const Image& raw, ResampleFactors factors, int output_rows, int output_cols) {
  if (raw.empty()) throw std::invalid_argument("resample_patch: empty patch");
  if (!(factors.lateral_up > 0.0) || !(factors.axial_down > 0.0))
    throw std::invalid_argument("resample_patch: factors must be positive");
  if (output_rows <= 0 || output_cols <= 0) throw std::invalid_argument("resample_patch: bad output size");

  Image img = raw;
  if (factors.axial_down > 1.0) {
    const int width = 2 * static_cast<int>(std::floor(factors.axial_down / 2.0)) + 1;
    img = box_lowpass_rows(img, width);
  }
  const int rows = std::max(1, static_cast<int>(std::lround(raw.rows() / factors.axial_down)));
  const int cols = std::max(1, static_cast<int>(std::lround(raw.cols() * factors.lateral_up)));
  if (rows != img.rows()) img = resample_axis(img, rows, true);
  if (cols != img.cols()) img = resample_axis(img, cols, false);

  // near-square (within 10 %) shapes are center-cropped to a square before any resize
  const int side = std::min(img.rows(), img.cols());
  if (img.rows() != img.cols() && std::max(img.rows(), img.cols()) <= side * 1.1) img = center_crop(img, side, side);

  if (img.rows() >= output_rows && img.cols() >= output_cols && img.rows() <= output_rows * 1.1 &&
      img.cols() <= output_cols * 1.1)
    img = center_crop(img, output_rows, output_cols);
  if (img.rows() != output_rows) img = resample_axis(img, output_rows, true);
  if (img.cols() != output_cols) img = resample_axis(img, output_cols, false);
  return img;
}

Image normalize_patch(const Image& patch) {
  if (patch.empty()) throw std::invalid_argument("normalize_patch: empty patch");
  const auto& v = patch.values();
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (float x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-8) throw DegeneratePatchError("normalize_patch: zero-variance patch");

  Image out(patch.rows(), patch.cols());
  for (std::size_t i = 0; i < v.size(); ++i) out.values()[i] = static_cast<float>((v[i] - mean) / sd);
  return out;
}

std::vector<ProcessedPatch> process_image(const RfImage& image, const PipelineConfig& config) {
  Mask roi;
  const Mask* roi_ptr = nullptr;
  if (config.restrict_to_roi) {
    roi = needle_roi(image);
    roi_ptr = &roi;
  }
  std::vector<ProcessedPatch> out;
  for (auto& raw : extract_patches(image, roi_ptr, config.grid)) {
    Image px = resample_patch(raw.pixels, config.factors, config.grid.output_rows, config.grid.output_cols);
    try {
      out.push_back({normalize_patch(px), raw.origin_row, raw.origin_col});
    } catch (const DegeneratePatchError&) {
      // dropped
    }
  }
  return out;
}

}  // namespace evicore::preprocess
