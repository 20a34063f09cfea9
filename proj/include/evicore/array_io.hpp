#pragma once

#include <filesystem>
#include <vector>

#include "evicore/domain.hpp"

namespace evicore {

/// Stack of equally sized float images, as stored on disk: a little-endian header of three
/// int32 values (count, height, width) followed by row-major little-endian float32 data.
struct ImageStack {
  int height = 0;
  int width = 0;
  std::vector<Image> images;
};

void write_image_stack(const std::filesystem::path& path, const std::vector<Image>& images);
ImageStack read_image_stack(const std::filesystem::path& path);

/// Single-image convenience wrappers (count = 1).
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);

}  // namespace evicore
