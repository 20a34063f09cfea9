#include "evicore/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <png.h>

namespace evicore::cli {

namespace fs = std::filesystem;

std::vector<bool> HeatmapGrid::retained(double tau) const {
  std::vector<bool> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) out[i] = cells[i].confidence >= tau;
  return out;
}

std::size_t HeatmapGrid::retained_count(double tau) const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [&](const HeatmapCell& c) { return c.confidence >= tau; }));
}

HeatmapGrid sliding_window_heatmap(Predictor& predictor, const preprocess::RfImage& image,
                                   const preprocess::PatchGrid& grid, preprocess::ResampleFactors factors) {
  const auto win = preprocess::window_shape(image, grid);
  const auto raw = preprocess::extract_patches(image, nullptr, grid);
  HeatmapGrid out{image.samples.rows(), image.samples.cols(), win.rows, win.cols, {}};
  out.cells.resize(raw.size());

  std::vector<Image> ready;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.cells[i].origin_row = raw[i].origin_row;
    out.cells[i].origin_col = raw[i].origin_col;
    try {
      ready.push_back(preprocess::normalize_patch(
          preprocess::resample_patch(raw[i].pixels, factors, grid.output_rows, grid.output_cols)));
      where.push_back(i);
    } catch (const preprocess::DegeneratePatchError&) {
    }
  }
  constexpr std::size_t kBatch = 256;
  for (std::size_t start = 0; start < ready.size(); start += kBatch) {
    const std::size_t end = std::min(ready.size(), start + kBatch);
    std::vector<const Image*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&ready[i]);
    const auto scores = predictor.predict(batch_from_images(ptrs));
    for (std::size_t i = start; i < end; ++i) {
      out.cells[where[i]].prob_cancer = scores[i - start].prob_cancer;
      out.cells[where[i]].confidence = scores[i - start].confidence;
    }
  }
  return out;
}

void render_heatmap_png(const fs::path& path, const preprocess::RfImage& image, const HeatmapGrid& grid, double tau) {
  const int rows = image.samples.rows(), cols = image.samples.cols();
  if (rows != grid.image_rows || cols != grid.image_cols) throw std::invalid_argument("heatmap: grid/image mismatch");

  // background: log envelope, scaled to [0, 1]
  std::vector<double> bg(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = std::log1p(std::abs(image.samples.values()[i]));
  const auto [lo, hi] = std::minmax_element(bg.begin(), bg.end());
  const double span = *hi - *lo > 0 ? *hi - *lo : 1.0;
  const double base = *lo;
  for (double& v : bg) v = (v - base) / span;

  std::vector<double> prob(bg.size(), 0.0);
  std::vector<int> hits(bg.size(), 0);
  for (const auto& c : grid.cells) {
    if (c.confidence < tau) continue;
    for (int r = c.origin_row; r < c.origin_row + grid.window_rows; ++r)
      for (int k = c.origin_col; k < c.origin_col + grid.window_cols; ++k) {
        prob[static_cast<std::size_t>(r) * cols + k] += c.prob_cancer;
        ++hits[static_cast<std::size_t>(r) * cols + k];
      }
  }

  std::vector<png_byte> pixels(static_cast<std::size_t>(rows) * cols * 3);
  for (std::size_t i = 0; i < bg.size(); ++i) {
    double rgb[3] = {bg[i], bg[i], bg[i]};
    if (hits[i] > 0) {
      const bool cancer = prob[i] / hits[i] > 0.5;
      const double tint[3] = {cancer ? 1.0 : 0.0, 0.0, cancer ? 0.0 : 1.0};
      for (int k = 0; k < 3; ++k) rgb[k] = 0.5 * rgb[k] + 0.5 * tint[k];
    }
    for (int k = 0; k < 3; ++k) pixels[i * 3 + k] = static_cast<png_byte>(std::lround(255.0 * rgb[k]));
  }

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, cols, rows, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < rows; ++r) png_write_row(png, &pixels[static_cast<std::size_t>(r) * cols * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_heatmap_csv(const fs::path& path, const HeatmapGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "origin_row,origin_col,window_rows,window_cols,prob_cancer,confidence\n";
  for (const auto& c : grid.cells)
    out << c.origin_row << ',' << c.origin_col << ',' << grid.window_rows << ',' << grid.window_cols << ','
        << c.prob_cancer << ',' << c.confidence << '\n';
}

std::optional<double> cancer_region_overlap(const HeatmapGrid& grid, const Mask& region, double tau) {
  if (region.rows() != grid.image_rows || region.cols() != grid.image_cols)
    throw std::invalid_argument("cancer_region_overlap: region shape differs from image");
  std::size_t called = 0, inside = 0;
  for (const auto& c : grid.cells) {
    if (c.confidence < tau || !(c.prob_cancer > 0.5)) continue;
    ++called;
    if (region(c.origin_row + grid.window_rows / 2, c.origin_col + grid.window_cols / 2)) ++inside;
  }
  if (called == 0) return std::nullopt;
  return static_cast<double>(inside) / static_cast<double>(called);
}

}  // namespace evicore::cli
