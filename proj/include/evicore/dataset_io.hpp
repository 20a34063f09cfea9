#pragma once

#include <filesystem>

#include "evicore/domain.hpp"

namespace evicore {

/// Dataset directory layout:
///   metadata.jsonl   one record per core (core_id, patient_id, weak_label, involvement,
///                    n_patches, patch_file)
///   cores/<id>.bin   patch stack in the image-stack array format
///   oracle.jsonl     synthetic ground truth per core (optional)
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace evicore
