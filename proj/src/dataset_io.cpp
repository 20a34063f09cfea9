#include "evicore/dataset_io.hpp"

#include <fstream>

#include <json.hpp>

#include "evicore/array_io.hpp"

namespace evicore {

using nlohmann::json;
namespace fs = std::filesystem;

void write_dataset(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir / "cores");
  std::ofstream meta(dir / "metadata.jsonl");
  if (!meta) throw std::runtime_error("cannot write " + (dir / "metadata.jsonl").string());

  for (const auto& core : dataset.cores) {
    const std::string rel = "cores/" + core.core_id() + ".bin";
    std::vector<Image> stack;
    stack.reserve(core.size());
    for (const auto& p : core.patches()) stack.push_back(p.pixels);
    write_image_stack(dir / rel, stack);

    json rec = {{"core_id", core.core_id()},
                {"patient_id", core.patient_id()},
                {"weak_label", to_int(core.weak_label())},
                {"involvement", core.involvement()},
                {"n_patches", core.size()},
                {"patch_file", rel}};
    meta << rec.dump() << '\n';
  }

  if (!dataset.oracle.empty()) {
    std::ofstream oracle(dir / "oracle.jsonl");
    for (const auto& [id, truth] : dataset.oracle.all()) {
      json labels = json::array(), ood = json::array();
      for (const auto& t : truth) {
        labels.push_back(to_int(t.true_label));
        ood.push_back(t.is_ood);
      }
      oracle << json{{"core_id", id}, {"true_labels", labels}, {"is_ood", ood}}.dump() << '\n';
    }
  }
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream meta(dir / "metadata.jsonl");
  if (!meta) throw std::runtime_error("no metadata.jsonl in " + dir.string());

  Dataset ds;
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    auto stack = read_image_stack(dir / rec.at("patch_file").get<std::string>());
    if (rec.contains("n_patches") && rec.at("n_patches").get<std::size_t>() != stack.images.size())
      throw std::runtime_error("patch count mismatch for core " + rec.at("core_id").get<std::string>());
    ds.cores.emplace_back(rec.at("core_id").get<std::string>(), rec.at("patient_id").get<std::string>(),
                          label_from_int(rec.at("weak_label").get<int>()),
                          rec.at("involvement").get<double>(), std::move(stack.images));
  }

  std::ifstream oracle(dir / "oracle.jsonl");
  while (oracle && std::getline(oracle, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    const auto& labels = rec.at("true_labels");
    const auto& ood = rec.at("is_ood");
    std::vector<PatchTruth> truth(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      truth[i].true_label = label_from_int(labels[i].get<int>());
      truth[i].is_ood = ood.at(i).get<bool>();
    }
    ds.oracle.add(rec.at("core_id").get<std::string>(), std::move(truth));
  }
  return ds;
}

}  // namespace evicore
