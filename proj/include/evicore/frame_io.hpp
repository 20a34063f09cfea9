#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "evicore/preprocess.hpp"

namespace evicore {

/// RF frame directory:
///   samples.bin         axial x lateral samples (image-stack format, one image)
///   prostate_mask.bin   same shape, nonzero inside the prostate
///   frame.json          spacings, needle geometry and core annotation
///   cancer_region.bin   optional synthetic ground truth
struct FrameRecord {
  preprocess::RfImage image;
  std::string core_id = "frame";
  std::string patient_id = "frame";
  Label weak_label = Label::benign;
  double involvement = 0.0;
  std::optional<Mask> cancer_region;
};

void write_frame(const std::filesystem::path& dir, const FrameRecord& frame);
FrameRecord read_frame(const std::filesystem::path& dir);

}  // namespace evicore
