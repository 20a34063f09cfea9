#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <json.hpp>

#include "evicore/config.hpp"
#include "evicore/eval.hpp"
#include "evicore/predict.hpp"
#include "evicore/synthgen.hpp"

namespace evicore::cli {

struct PreparedData {
  synth::Split split;
  OracleView oracle;
};

/// Loads or generates cores, filters by involvement, balances classes and splits by patient.
/// Depends only on the data section and split_seed, never on run seeds.
PreparedData prepare_data(const ExperimentConfig& config);

struct TrainedModel {
  MethodSpec method;
  std::vector<nn::Backbone> models;  // ensemble members, or a single model
  std::vector<int> best_epochs;
  std::vector<char> best_peers;
};

TrainedModel train_method(const MethodSpec& method, const ExperimentConfig& config, const synth::Split& split,
                          std::uint64_t seed, const std::filesystem::path& epoch_log = {});

/// Writes model.ckpt (single) or member_<i>.ckpt files; returns the written paths.
std::vector<std::filesystem::path> save_models(const std::filesystem::path& dir, TrainedModel& trained,
                                               const ExperimentConfig& config, std::uint64_t seed);

struct LoadedModel {
  MethodSpec method;
  std::vector<nn::Backbone> models;
  edl::Activation activation = edl::Activation::softplus;
  int mc_passes = 20;
  std::uint64_t seed = 0;
};

LoadedModel load_models(const std::filesystem::path& run_dir);

/// Predictor matching the method family; the loaded model must outlive it.
std::unique_ptr<Predictor> make_predictor(LoadedModel& loaded);

/// Metric report: core metrics at tau 0, patch metrics against weak and (when known) oracle
/// labels, OOD summary when OOD patches are present.
nlohmann::json evaluate(std::span<const eval::PatchPrediction> predictions, int ece_bins);

void write_predictions_csv(const std::filesystem::path& path, std::span<const eval::PatchPrediction> predictions);
std::vector<eval::PatchPrediction> read_predictions_csv(const std::filesystem::path& path);

/// Evaluates a run directory's checkpoint(s) on the test cores and writes predictions.csv,
/// metrics.json, curve.csv and reliability.csv. Returns the metrics.
nlohmann::json evaluate_run(const std::filesystem::path& run_dir, const ExperimentConfig& config,
                            const PreparedData& data);

/// Mean and sample standard deviation of every numeric metric, per method.
nlohmann::json summarize(const std::vector<nlohmann::json>& metrics);

/// Full grid: train, checkpoint, reload, evaluate for every (method, seed); then summary.json
/// and manifest.json. Returns the summary.
nlohmann::json run_experiment(const ExperimentConfig& config);

std::filesystem::path run_directory(const ExperimentConfig& config, const std::string& method, std::uint64_t seed);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

/// Config as {section: {key: value}}.
nlohmann::json config_json(const ExperimentConfig& config);

void write_manifest(const std::filesystem::path& output_dir, const ExperimentConfig& config);

}  // namespace evicore::cli
