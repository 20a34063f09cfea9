#include "evicore/frame_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "evicore/array_io.hpp"

namespace evicore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Image mask_to_image(const Mask& m) {
  Image out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = m.values()[i] ? 1.0f : 0.0f;
  return out;
}

Mask image_to_mask(const Image& img) {
  Mask out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out.values()[i] = img.values()[i] != 0.0f ? 1 : 0;
  return out;
}

}  // namespace

void write_frame(const fs::path& dir, const FrameRecord& frame) {
  frame.image.validate();
  fs::create_directories(dir);
  write_image(dir / "samples.bin", frame.image.samples);
  write_image(dir / "prostate_mask.bin", mask_to_image(frame.image.prostate_mask));
  if (frame.cancer_region) write_image(dir / "cancer_region.bin", mask_to_image(*frame.cancer_region));
  const auto& n = frame.image.needle;
  json meta = {{"axial_spacing_mm", frame.image.axial_spacing_mm},
               {"lateral_spacing_mm", frame.image.lateral_spacing_mm},
               {"needle",
                {{"angle_deg", n.angle_deg},
                 {"entry_row", n.entry_row},
                 {"entry_col", n.entry_col},
                 {"half_width_mm", n.half_width_mm},
                 {"length_mm", std::isfinite(n.length_mm) ? json(n.length_mm) : json(nullptr)}}},
               {"core_id", frame.core_id},
               {"patient_id", frame.patient_id},
               {"weak_label", to_int(frame.weak_label)},
               {"involvement", frame.involvement}};
  std::ofstream out(dir / "frame.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "frame.json").string());
  out << meta.dump(2) << '\n';
}

FrameRecord read_frame(const fs::path& dir) {
  std::ifstream in(dir / "frame.json");
  if (!in) throw std::runtime_error("no frame.json in " + dir.string());
  const json meta = json::parse(in);
  FrameRecord f;
  f.image.samples = read_image(dir / "samples.bin");
  f.image.prostate_mask = image_to_mask(read_image(dir / "prostate_mask.bin"));
  f.image.axial_spacing_mm = meta.at("axial_spacing_mm").get<double>();
  f.image.lateral_spacing_mm = meta.at("lateral_spacing_mm").get<double>();
  const auto& n = meta.at("needle");
  f.image.needle.angle_deg = n.at("angle_deg").get<double>();
  f.image.needle.entry_row = n.at("entry_row").get<double>();
  f.image.needle.entry_col = n.at("entry_col").get<double>();
  f.image.needle.half_width_mm = n.at("half_width_mm").get<double>();
  f.image.needle.length_mm =
      n.at("length_mm").is_null() ? std::numeric_limits<double>::infinity() : n.at("length_mm").get<double>();
  f.core_id = meta.value("core_id", std::string("frame"));
  f.patient_id = meta.value("patient_id", f.core_id);
  f.weak_label = label_from_int(meta.value("weak_label", 0));
  f.involvement = meta.value("involvement", 0.0);
  if (fs::exists(dir / "cancer_region.bin")) f.cancer_region = image_to_mask(read_image(dir / "cancer_region.bin"));
  f.image.validate();
  return f;
}

}  // namespace evicore
