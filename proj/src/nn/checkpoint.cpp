#include "evicore/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace evicore::nn {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'V', 'I', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json config_to_json(const BackboneConfig& c) {
  return {{"kind", to_string(c.kind)}, {"dropout_rate", c.dropout_rate}, {"input_rows", c.input_rows},
          {"input_cols", c.input_cols}, {"output_dim", c.output_dim},     {"width", c.width}};
}

BackboneConfig config_from_json(const json& j) {
  BackboneConfig c;
  c.kind = backbone_kind_from_string(j.at("kind").get<std::string>());
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.input_rows = j.at("input_rows").get<int>();
  c.input_cols = j.at("input_cols").get<int>();
  c.output_dim = j.at("output_dim").get<int>();
  c.width = j.at("width").get<int>();
  return c;
}

struct Entry {
  std::string name;
  Tensor* tensor;
};

std::vector<Entry> entries(Backbone& model) {
  std::vector<Entry> out;
  for (auto& p : model.parameters()) out.push_back({p.name, p.value});
  for (auto& b : model.buffers()) out.push_back({b.name, b.value});
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Backbone& model,
                     const std::map<std::string, std::string>& metadata) {
  json table = json::array();
  std::size_t offset = 0;
  const auto items = entries(model);
  for (const auto& e : items) {
    const auto& s = e.tensor->shape();
    table.push_back({{"name", e.name}, {"shape", {s[0], s[1], s[2], s[3]}}, {"offset", offset}});
    offset += e.tensor->size();
  }
  const json header = {{"config", config_to_json(model.config())}, {"metadata", metadata}, {"tensors", table}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : items)
    for (Scalar v : e.tensor->values()) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("not a checkpoint: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
  const json header = json::parse(text);

  Checkpoint ckpt{Backbone(config_from_json(header.at("config")), 0), {}};
  for (const auto& [k, v] : header.at("metadata").items()) ckpt.metadata[k] = v.get<std::string>();

  const auto items = entries(ckpt.model);
  const auto& table = header.at("tensors");
  if (table.size() != items.size()) throw std::runtime_error("checkpoint tensor count does not match architecture");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& rec = table[i];
    if (rec.at("name").get<std::string>() != items[i].name)
      throw std::runtime_error("checkpoint tensor name mismatch: " + rec.at("name").get<std::string>());
    const auto shape = rec.at("shape").get<std::array<int, 4>>();
    if (shape != items[i].tensor->shape()) throw std::runtime_error("checkpoint shape mismatch for " + items[i].name);
    for (Scalar& v : items[i].tensor->values()) {
      float f;
      in.read(reinterpret_cast<char*>(&f), sizeof f);
      v = f;
    }
  }
  if (!in) throw std::runtime_error("truncated checkpoint data: " + path.string());
  return ckpt;
}

}  // namespace evicore::nn
