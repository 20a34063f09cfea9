#include "evicore/domain.hpp"

namespace evicore {

BiopsyCore::BiopsyCore(std::string core_id, std::string patient_id, Label weak_label,
                       double involvement, std::vector<Image> patch_pixels)
    : core_id_(std::move(core_id)),
      patient_id_(std::move(patient_id)),
      weak_label_(weak_label),
      involvement_(involvement) {
  if (patch_pixels.empty()) throw std::invalid_argument("BiopsyCore: core must hold at least one patch");
  if (!(involvement >= 0.0 && involvement <= 1.0))
    throw std::invalid_argument("BiopsyCore: involvement must lie in [0, 1]");
  if (weak_label == Label::benign && involvement != 0.0)
    throw std::invalid_argument("BiopsyCore: benign cores have zero involvement");
  patches_.reserve(patch_pixels.size());
  for (auto& px : patch_pixels) patches_.push_back(Patch{std::move(px), weak_label_, core_id_});
}

void OracleView::add(const std::string& core_id, std::vector<PatchTruth> truth) {
  truth_[core_id] = std::move(truth);
}

const std::vector<PatchTruth>& OracleView::core(const std::string& core_id) const {
  auto it = truth_.find(core_id);
  if (it == truth_.end()) throw std::out_of_range("OracleView: no truth for core " + core_id);
  return it->second;
}

}  // namespace evicore
