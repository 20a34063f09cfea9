#include "evicore/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "evicore/baselines.hpp"
#include "evicore/dataset_io.hpp"
#include "evicore/nn/checkpoint.hpp"
#include "evicore/texture.hpp"

namespace evicore::cli {

namespace fs = std::filesystem;
using nlohmann::json;

PreparedData prepare_data(const ExperimentConfig& config) {
  Dataset ds = config.dataset_dir.empty() ? synth::generate_dataset(config.synth) : read_dataset(config.dataset_dir);
  auto cores = synth::filter_by_involvement(std::move(ds.cores), config.min_involvement);
  if (config.balance) cores = synth::balance_cores(std::move(cores), config.split_seed);
  PreparedData out{synth::split_by_patient(cores, config.split, config.split_seed), std::move(ds.oracle)};
  if (out.split.train.empty() || out.split.val.empty() || out.split.test.empty())
    throw std::invalid_argument("data split left an empty train, val or test set");
  return out;
}

namespace {

coteach::CoteachConfig training_for(const MethodSpec& method, const ExperimentConfig& config,
                                    const synth::Split& split) {
  auto t = config.training;
  const auto& px = split.train.front().patches().front().pixels;
  t.backbone.input_rows = px.rows();
  t.backbone.input_cols = px.cols();
  t.co_teaching = method.co_teaching;
  t.loss_kind = method.family == MethodFamily::edl ? LossKind::edl : LossKind::cross_entropy;
  return t;
}

json epoch_json(const coteach::EpochRecord& r, int member) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"epoch", r.epoch},
            {"R", r.ratio},
            {"train_loss_a", r.train_loss_a},
            {"train_loss_b", opt(r.train_loss_b)},
            {"val_auc_a", opt(r.val_auc_a)},
            {"val_auc_b", opt(r.val_auc_b)},
            {"val_patch_bacc_a", r.val_patch_bacc_a},
            {"val_patch_bacc_b", opt(r.val_patch_bacc_b)}};
  if (member >= 0) j["member"] = member;
  return j;
}

}  // namespace

TrainedModel train_method(const MethodSpec& method, const ExperimentConfig& config, const synth::Split& split,
                          std::uint64_t seed, const fs::path& epoch_log) {
  const auto training = training_for(method, config, split);
  std::ofstream log;
  if (!epoch_log.empty()) {
    log.open(epoch_log);
    if (!log) throw std::runtime_error("cannot write " + epoch_log.string());
  }
  int member = -1;
  auto sink = [&](const coteach::EpochRecord& r) {
    if (log) log << epoch_json(r, member).dump() << '\n';
  };

  TrainedModel out{method, {}, {}, {}};
  if (method.family == MethodFamily::ensemble) {
    for (int m = 0; m < config.ensemble_size; ++m) {
      member = m;
      auto res = coteach::train(split.train, split.val, training, synth::substream(seed, m, 30)(), sink);
      out.models.push_back(std::move(res.best));
      out.best_epochs.push_back(res.best_epoch);
      out.best_peers.push_back(res.best_peer);
    }
  } else {
    auto res = coteach::train(split.train, split.val, training, seed, sink);
    out.models.push_back(std::move(res.best));
    out.best_epochs.push_back(res.best_epoch);
    out.best_peers.push_back(res.best_peer);
  }
  return out;
}

std::vector<fs::path> save_models(const fs::path& dir, TrainedModel& trained, const ExperimentConfig& config,
                                  std::uint64_t seed) {
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  const bool single = trained.models.size() == 1;
  for (std::size_t i = 0; i < trained.models.size(); ++i) {
    std::map<std::string, std::string> meta = {
        {"method", trained.method.name},
        {"seed", std::to_string(seed)},
        {"best_epoch", std::to_string(trained.best_epochs[i])},
        {"best_peer", std::string(1, trained.best_peers[i])},
        {"optimizer", nn::to_string(config.training.optimizer.kind)},
        {"activation", config.training.edl.activation == edl::Activation::relu ? "relu" : "softplus"},
        {"mc_passes", std::to_string(config.mc_passes)},
        {"member", std::to_string(i)},
        {"members", std::to_string(trained.models.size())}};
    const fs::path p = dir / (single ? std::string("model.ckpt") : "member_" + std::to_string(i) + ".ckpt");
    nn::save_checkpoint(p, trained.models[i], meta);
    paths.push_back(p);
  }
  return paths;
}

LoadedModel load_models(const fs::path& run_dir) {
  std::vector<fs::path> files;
  if (fs::exists(run_dir / "model.ckpt")) {
    files.push_back(run_dir / "model.ckpt");
  } else {
    for (int i = 0; fs::exists(run_dir / ("member_" + std::to_string(i) + ".ckpt")); ++i)
      files.push_back(run_dir / ("member_" + std::to_string(i) + ".ckpt"));
  }
  if (files.empty()) throw std::runtime_error("no checkpoint in " + run_dir.string());
  LoadedModel out;
  for (const auto& f : files) {
    auto ckpt = nn::load_checkpoint(f);
    if (out.models.empty()) {
      const auto& m = ckpt.metadata;
      auto field = [&](const char* k) {
        auto it = m.find(k);
        if (it == m.end()) throw std::runtime_error(f.string() + ": missing metadata field " + k);
        return it->second;
      };
      out.method = parse_method(field("method"));
      out.activation = field("activation") == "relu" ? edl::Activation::relu : edl::Activation::softplus;
      out.mc_passes = std::stoi(field("mc_passes"));
      out.seed = std::stoull(field("seed"));
    }
    out.models.push_back(std::move(ckpt.model));
  }
  return out;
}

std::unique_ptr<Predictor> make_predictor(LoadedModel& loaded) {
  switch (loaded.method.family) {
    case MethodFamily::edl:
      return std::make_unique<EvidentialPredictor>(loaded.models.front(), loaded.activation);
    case MethodFamily::cross_entropy:
      return std::make_unique<SoftmaxPredictor>(loaded.models.front());
    case MethodFamily::mc_dropout:
      return std::make_unique<baselines::McDropoutPredictor>(loaded.models.front(), loaded.mc_passes,
                                                             synth::substream(loaded.seed, 0, 40)());
    case MethodFamily::ensemble:
      return std::make_unique<baselines::EnsemblePredictor>(loaded.models);
  }
  throw std::logic_error("unhandled method family");
}

json evaluate(std::span<const eval::PatchPrediction> predictions, int ece_bins) {
  json m;
  const auto cores = eval::group_by_core(predictions);
  m["test_cores"] = cores.size();
  m["test_patches"] = predictions.size();
  try {
    const auto c = eval::core_metrics(eval::aggregate_all(cores, 0.0));
    m["core"] = {{"auc", c.auc},
                 {"sensitivity", c.sensitivity},
                 {"specificity", c.specificity},
                 {"balanced_accuracy", c.balanced_accuracy},
                 {"predicted", c.predicted},
                 {"uncertain", c.uncertain}};
  } catch (const std::invalid_argument&) {
    m["core"] = nullptr;
  }

  json patch;
  auto add = [&](eval::LabelSource src, const std::string& suffix) {
    try {
      patch["balanced_accuracy_" + suffix] = eval::patch_balanced_accuracy(predictions, src);
    } catch (const std::invalid_argument&) {
      patch["balanced_accuracy_" + suffix] = nullptr;
    }
    patch["ece_" + suffix] = eval::ece(eval::outcomes(predictions, src), ece_bins).ece;
  };
  add(eval::LabelSource::weak, "weak");
  const bool has_truth = std::all_of(predictions.begin(), predictions.end(),
                                     [](const eval::PatchPrediction& p) { return p.true_label.has_value(); });
  if (has_truth) add(eval::LabelSource::truth, "oracle");
  double conf = 0.0;
  for (const auto& p : predictions) conf += p.confidence;
  patch["mean_confidence"] = conf / static_cast<double>(predictions.size());
  m["patch"] = patch;

  if (auto ood = eval::ood_summary(predictions)) {
    m["ood"] = {{"mean_uncertainty_ood", ood->mean_uncertainty_ood},
                {"mean_uncertainty_id", ood->mean_uncertainty_id},
                {"auroc", ood->auroc},
                {"n_ood", ood->n_ood},
                {"n_id", ood->n_id}};
  }
  return m;
}

void write_predictions_csv(const fs::path& path, std::span<const eval::PatchPrediction> predictions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "core_id,weak_label,prob_cancer,confidence,predicted_label,true_label,is_ood\n";
  for (const auto& p : predictions) {
    out << p.core_id << ',' << to_int(p.weak_label) << ',' << p.prob_cancer << ',' << p.confidence << ','
        << to_int(p.predicted_label) << ',';
    if (p.true_label) out << to_int(*p.true_label);
    out << ',';
    if (p.is_ood) out << (*p.is_ood ? 1 : 0);
    out << '\n';
  }
}

std::vector<eval::PatchPrediction> read_predictions_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<eval::PatchPrediction> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw std::runtime_error("malformed prediction row: " + line);
    eval::PatchPrediction p;
    p.core_id = f[0];
    p.weak_label = label_from_int(std::stoi(f[1]));
    p.prob_cancer = std::stod(f[2]);
    p.confidence = std::stod(f[3]);
    p.predicted_label = label_from_int(std::stoi(f[4]));
    if (!f[5].empty()) p.true_label = label_from_int(std::stoi(f[5]));
    if (!f[6].empty()) p.is_ood = f[6] == "1";
    out.push_back(std::move(p));
  }
  return out;
}

fs::path run_directory(const ExperimentConfig& config, const std::string& method, std::uint64_t seed) {
  return fs::path(config.output_dir) / method / ("seed_" + std::to_string(seed));
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

json evaluate_run(const fs::path& run_dir, const ExperimentConfig& config, const PreparedData& data) {
  auto loaded = load_models(run_dir);
  auto predictor = make_predictor(loaded);
  const auto preds = predict_cores(*predictor, data.split.test, data.oracle.empty() ? nullptr : &data.oracle);
  write_predictions_csv(run_dir / "predictions.csv", preds);

  json m = evaluate(preds, config.ece_bins);
  m["method"] = loaded.method.name;
  m["seed"] = loaded.seed;
  const auto curve = eval::accuracy_vs_confidence_curve(preds, config.tau_grid);
  eval::write_curve_csv(run_dir / "curve.csv", curve);
  const bool has_truth = m["patch"].contains("ece_oracle");
  const auto src = has_truth ? eval::LabelSource::truth : eval::LabelSource::weak;
  eval::write_reliability_csv(run_dir / "reliability.csv", eval::ece(eval::outcomes(preds, src), config.ece_bins));
  write_json(run_dir / "metrics.json", m);
  return m;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, double>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(*it, key, out);
    else if (it->is_number() && key != "seed") out[key] = it->get<double>();
  }
}

}  // namespace

json summarize(const std::vector<json>& metrics) {
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  std::map<std::string, std::vector<std::uint64_t>> seeds;
  for (const auto& m : metrics) {
    const std::string method = m.at("method").get<std::string>();
    seeds[method].push_back(m.at("seed").get<std::uint64_t>());
    std::map<std::string, double> flat;
    flatten(m, "", flat);
    for (const auto& [k, v] : flat) values[method][k].push_back(v);
  }
  json out = json::object();
  for (const auto& [method, table] : values) {
    json jm;
    jm["seeds"] = seeds[method];
    for (const auto& [key, v] : table) {
      const double n = static_cast<double>(v.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      jm["metrics"][key] = {{"mean", mean}, {"std", sd}, {"n", v.size()}};
    }
    out[method] = jm;
  }
  return out;
}

json config_json(const ExperimentConfig& config) {
  json j = json::object();
  for (const auto& [section, body] : to_ptree(config))
    for (const auto& [key, value] : body) j[section][key] = value.data();
  return j;
}

void write_manifest(const fs::path& output_dir, const ExperimentConfig& config) {
  std::vector<std::string> artifacts;
  for (const auto& e : fs::recursive_directory_iterator(output_dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      artifacts.push_back(fs::relative(e.path(), output_dir).generic_string());
  std::sort(artifacts.begin(), artifacts.end());
  write_json(output_dir / "manifest.json", {{"config", config_json(config)}, {"artifacts", artifacts}});
}

json run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<MethodSpec> methods;
  for (const auto& name : config.methods) methods.push_back(parse_method(name));

  const auto data = prepare_data(config);
  fs::create_directories(config.output_dir);
  write_config(fs::path(config.output_dir) / "config.ini", config);

  std::vector<json> all;
  for (const auto& method : methods) {
    for (auto seed : config.seeds) {
      const fs::path dir = run_directory(config, method.name, seed);
      fs::create_directories(dir);
      auto trained = train_method(method, config, data.split, seed, dir / "epochs.jsonl");
      save_models(dir, trained, config, seed);
      json m = evaluate_run(dir, config, data);
      m["best_epochs"] = trained.best_epochs;
      write_json(dir / "metrics.json", m);
      all.push_back(std::move(m));
    }
  }
  json summary = summarize(all);
  write_json(fs::path(config.output_dir) / "summary.json", summary);
  write_manifest(config.output_dir, config);
  return summary;
}

}  // namespace evicore::cli
