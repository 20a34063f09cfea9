#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evicore/array_io.hpp"
#include "evicore/config.hpp"
#include "evicore/dataset_io.hpp"
#include "evicore/experiment.hpp"
#include "evicore/frame_io.hpp"
#include "evicore/heatmap.hpp"
#include "evicore/synthgen.hpp"

using namespace evicore;
using namespace evicore::cli;
namespace fs = std::filesystem;

namespace {

struct ConfigOptions {
  std::string path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "INI config file")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) app->add_option("--" + key.name, values[key.name], key.help);
  }

  ExperimentConfig resolve(CLI::App* app) const {
    std::map<std::string, std::string> set;
    for (const auto& [k, v] : values)
      if (app->count("--" + k) > 0) set[k] = v;
    return load_config(path, set);
  }
};

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

std::string tau_tag(double tau) {
  std::ostringstream os;
  os.precision(3);
  os << std::fixed << tau;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evidential classification under weak labels"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic core dataset or RF frame");
  ConfigOptions synth_cfg;
  synth_cfg.attach(synth_cmd);
  std::string synth_out;
  bool synth_frame = false;
  std::string frame_label = "cancer";
  synth_cmd->add_option("--out", synth_out, "destination directory (default: <output_dir>/dataset)");
  synth_cmd->add_flag("--rf-frame", synth_frame, "write one whole RF frame instead of cores");
  synth_cmd->add_option("--frame-label", frame_label, "benign | cancer (RF frame only)");

  // preprocess
  auto* pre_cmd = app.add_subcommand("preprocess", "turn RF frames into a dataset of patches");
  std::vector<std::string> frames;
  std::string pre_out;
  preprocess::PipelineConfig pipeline;
  pre_cmd->add_option("--frames", frames, "RF frame directories")->required();
  pre_cmd->add_option("--out", pre_out, "dataset directory")->required();
  pre_cmd->add_option("--patch_size_mm", pipeline.grid.patch_size_mm, "window side in mm");
  pre_cmd->add_option("--overlap", pipeline.grid.overlap_fraction, "window overlap fraction");
  pre_cmd->add_option("--output_rows", pipeline.grid.output_rows, "patch rows after resampling");
  pre_cmd->add_option("--output_cols", pipeline.grid.output_cols, "patch cols after resampling");
  pre_cmd->add_option("--lateral_up", pipeline.factors.lateral_up, "lateral upsampling factor");
  pre_cmd->add_option("--axial_down", pipeline.factors.axial_down, "axial downsampling factor");
  bool whole_frame = false;
  pre_cmd->add_flag("--whole-frame", whole_frame, "no needle ROI restriction");

  // train / eval
  auto* train_cmd = app.add_subcommand("train", "train one method for one seed");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained run on the test cores");
  ConfigOptions train_cfg, eval_cfg;
  train_cfg.attach(train_cmd);
  eval_cfg.attach(eval_cmd);
  std::string method;
  std::uint64_t seed = 0;
  for (auto* c : {train_cmd, eval_cmd}) {
    c->add_option("--method", method, "method name, e.g. edl+coteach")->required();
    c->add_option("--seed", seed, "run seed");
  }

  // curve
  auto* curve_cmd = app.add_subcommand("curve", "accuracy/retention vs confidence threshold");
  ConfigOptions curve_cfg;
  curve_cfg.attach(curve_cmd);
  std::string predictions_path, curve_out;
  curve_cmd->add_option("--predictions", predictions_path, "predictions.csv")->required()->check(CLI::ExistingFile);
  curve_cmd->add_option("--out", curve_out, "curve CSV")->required();

  // heatmap
  auto* heat_cmd = app.add_subcommand("heatmap", "sliding-window heatmap over an RF frame");
  std::string run_dir, frame_dir, heat_out, taus = "0,0.7,0.8,0.85,0.9";
  preprocess::PipelineConfig heat_pipe;
  heat_pipe.grid.output_rows = heat_pipe.grid.output_cols = 0;
  heat_cmd->add_option("--run", run_dir, "run directory holding the checkpoint(s)")->required();
  heat_cmd->add_option("--frame", frame_dir, "RF frame directory")->required();
  heat_cmd->add_option("--out", heat_out, "output directory")->required();
  heat_cmd->add_option("--taus", taus, "comma list of confidence thresholds");
  heat_cmd->add_option("--patch_size_mm", heat_pipe.grid.patch_size_mm, "window side in mm");
  heat_cmd->add_option("--overlap", heat_pipe.grid.overlap_fraction, "window overlap fraction");
  heat_cmd->add_option("--lateral_up", heat_pipe.factors.lateral_up, "lateral upsampling factor");
  heat_cmd->add_option("--axial_down", heat_pipe.factors.axial_down, "axial downsampling factor");

  // summarize / run
  auto* sum_cmd = app.add_subcommand("summarize", "mean and std of metrics across seeds");
  auto* run_cmd = app.add_subcommand("run", "full method x seed grid");
  ConfigOptions sum_cfg, run_cfg;
  sum_cfg.attach(sum_cmd);
  run_cfg.attach(run_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_cmd) {
      const auto cfg = synth_cfg.resolve(synth_cmd);
      if (synth_frame) {
        synth::RfSceneConfig sc;
        sc.class_separation = cfg.synth.class_separation;
        sc.texture_jitter = cfg.synth.texture_jitter;
        sc.seed = cfg.synth.seed;
        if (frame_label != "cancer" && frame_label != "benign") throw std::invalid_argument("bad --frame-label");
        sc.core_label = frame_label == "cancer" ? Label::cancer : Label::benign;
        const auto scene = synth::generate_rf_scene(sc);
        FrameRecord f{scene.image, "frame_" + std::to_string(sc.seed), "frame_" + std::to_string(sc.seed),
                      sc.core_label, sc.core_label == Label::cancer ? sc.lesion_length_fraction : 0.0,
                      scene.cancer_region};
        const fs::path out = synth_out.empty() ? fs::path(cfg.output_dir) / "frame" : fs::path(synth_out);
        write_frame(out, f);
        std::cout << "wrote frame " << out.string() << '\n';
      } else {
        const fs::path out = synth_out.empty() ? fs::path(cfg.output_dir) / "dataset" : fs::path(synth_out);
        const auto ds = synth::generate_dataset(cfg.synth);
        write_dataset(out, ds);
        std::cout << "wrote " << ds.cores.size() << " cores to " << out.string() << '\n';
      }
      if (synth_out.empty()) write_manifest(cfg.output_dir, cfg);
    } else if (*pre_cmd) {
      pipeline.restrict_to_roi = !whole_frame;
      Dataset ds;
      for (const auto& dir : frames) {
        const auto f = read_frame(dir);
        std::vector<Image> px;
        for (auto& p : preprocess::process_image(f.image, pipeline)) px.push_back(std::move(p.pixels));
        if (px.empty()) throw std::runtime_error(dir + ": no patches survived preprocessing");
        ds.cores.emplace_back(f.core_id, f.patient_id, f.weak_label, f.involvement, std::move(px));
      }
      write_dataset(pre_out, ds);
      std::cout << "wrote " << ds.cores.size() << " cores to " << pre_out << '\n';
    } else if (*train_cmd) {
      const auto cfg = train_cfg.resolve(train_cmd);
      const auto spec = parse_method(method);
      const auto data = prepare_data(cfg);
      const fs::path dir = run_directory(cfg, spec.name, seed);
      fs::create_directories(dir);
      auto trained = train_method(spec, cfg, data.split, seed, dir / "epochs.jsonl");
      for (const auto& p : save_models(dir, trained, cfg, seed)) std::cout << "wrote " << p.string() << '\n';
      write_manifest(cfg.output_dir, cfg);
    } else if (*eval_cmd) {
      const auto cfg = eval_cfg.resolve(eval_cmd);
      const auto data = prepare_data(cfg);
      const auto m = evaluate_run(run_directory(cfg, parse_method(method).name, seed), cfg, data);
      std::cout << m.dump(2) << '\n';
      write_manifest(cfg.output_dir, cfg);
    } else if (*curve_cmd) {
      const auto cfg = curve_cfg.resolve(curve_cmd);
      const auto preds = read_predictions_csv(predictions_path);
      eval::write_curve_csv(curve_out, eval::accuracy_vs_confidence_curve(preds, cfg.tau_grid));
      std::cout << "wrote " << curve_out << '\n';
    } else if (*heat_cmd) {
      auto loaded = load_models(run_dir);
      auto predictor = make_predictor(loaded);
      const auto frame = read_frame(frame_dir);
      const auto& bc = loaded.models.front().config();
      heat_pipe.grid.output_rows = bc.input_rows;
      heat_pipe.grid.output_cols = bc.input_cols;
      const auto grid = sliding_window_heatmap(*predictor, frame.image, heat_pipe.grid, heat_pipe.factors);
      fs::create_directories(heat_out);
      write_heatmap_csv(fs::path(heat_out) / "heatmap.csv", grid);
      nlohmann::json summary = nlohmann::json::array();
      for (double tau : parse_doubles(taus)) {
        const fs::path png = fs::path(heat_out) / ("heatmap_tau_" + tau_tag(tau) + ".png");
        render_heatmap_png(png, frame.image, grid, tau);
        nlohmann::json row = {{"tau", tau}, {"cells", grid.cells.size()}, {"opaque_cells", grid.retained_count(tau)},
                              {"image", png.filename().string()}};
        if (frame.cancer_region) {
          const auto ov = cancer_region_overlap(grid, *frame.cancer_region, tau);
          row["cancer_region_overlap"] = ov ? nlohmann::json(*ov) : nlohmann::json(nullptr);
        }
        summary.push_back(row);
      }
      write_json(fs::path(heat_out) / "heatmap.json", summary);
      std::cout << summary.dump(2) << '\n';
    } else if (*sum_cmd) {
      const auto cfg = sum_cfg.resolve(sum_cmd);
      std::vector<nlohmann::json> all;
      for (const auto& m : cfg.methods)
        for (auto s : cfg.seeds) {
          const fs::path p = run_directory(cfg, m, s) / "metrics.json";
          if (fs::exists(p)) all.push_back(read_json(p));
        }
      if (all.empty()) throw std::runtime_error("no metrics.json found under " + cfg.output_dir);
      const auto summary = summarize(all);
      write_json(fs::path(cfg.output_dir) / "summary.json", summary);
      write_manifest(cfg.output_dir, cfg);
      std::cout << summary.dump(2) << '\n';
    } else if (*run_cmd) {
      const auto cfg = run_cfg.resolve(run_cmd);
      std::cout << run_experiment(cfg).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
