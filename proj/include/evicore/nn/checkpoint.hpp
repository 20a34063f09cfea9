#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "evicore/nn/backbone.hpp"

namespace evicore::nn {

/// Single-file archive: 8-byte magic "EVICKPT1", little-endian uint64 header length, a JSON
/// header (backbone config, free-form string metadata, tensor table), then every parameter and
/// buffer as little-endian float32 in table order.
struct Checkpoint {
  Backbone model;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, Backbone& model,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evicore::nn
