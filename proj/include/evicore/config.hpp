#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "evicore/coteach.hpp"
#include "evicore/synthgen.hpp"

namespace evicore::cli {

enum class MethodFamily { edl, cross_entropy, mc_dropout, ensemble };

/// One arm of the method grid, e.g. "edl", "edl+coteach", "ce", "mcdropout+coteach".
struct MethodSpec {
  std::string name;
  MethodFamily family = MethodFamily::edl;
  bool co_teaching = false;
};

MethodSpec parse_method(const std::string& name);
std::vector<std::string> all_methods();

struct ExperimentConfig {
  // data
  std::string dataset_dir;  // empty: generate from the synth section
  std::array<double, 3> split{0.6, 0.2, 0.2};
  std::uint64_t split_seed = 0;
  double min_involvement = 0.4;
  bool balance = true;
  synth::SynthConfig synth;
  // training
  std::vector<std::string> methods{"edl", "edl+coteach"};
  coteach::CoteachConfig training;
  int ensemble_size = 5;
  int mc_passes = 20;
  // reporting
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> tau_grid;
  int ece_bins = 10;
  std::string output_dir = "runs";

  ExperimentConfig();
  void validate() const;
};

struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
};

/// Every recognised key; names are unique across sections so each doubles as a flag name.
const std::vector<ConfigKey>& config_keys();

boost::property_tree::ptree to_ptree(const ExperimentConfig& config);
ExperimentConfig from_ptree(const boost::property_tree::ptree& tree);

/// Reads an INI file (if given) over the defaults, then applies key=value overrides by bare
/// key name. Unknown sections or keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides);
ExperimentConfig load_config(const std::map<std::string, std::string>& overrides);

void write_config(const std::filesystem::path& path, const ExperimentConfig& config);

std::string format_involvement(const synth::InvolvementDistribution& d);
synth::InvolvementDistribution parse_involvement(const std::string& text);

}  // namespace evicore::cli
