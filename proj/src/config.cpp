#include "evicore/config.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>

namespace evicore::cli {

namespace pt = boost::property_tree;

MethodSpec parse_method(const std::string& name) {
  MethodSpec m;
  m.name = name;
  std::string base = name;
  const std::string suffix = "+coteach";
  if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    m.co_teaching = true;
    base.resize(base.size() - suffix.size());
  }
  if (base == "edl") m.family = MethodFamily::edl;
  else if (base == "ce") m.family = MethodFamily::cross_entropy;
  else if (base == "mcdropout") m.family = MethodFamily::mc_dropout;
  else if (base == "ensemble") m.family = MethodFamily::ensemble;
  else throw std::invalid_argument("unknown method: " + name);
  return m;
}

std::vector<std::string> all_methods() {
  return {"edl", "edl+coteach", "ce", "ce+coteach", "mcdropout", "mcdropout+coteach", "ensemble", "ensemble+coteach"};
}

ExperimentConfig::ExperimentConfig() {
  for (int i = 0; i <= 20; ++i) tau_grid.push_back(i / 20.0);
  synth.patches_per_core = 20;
  synth.involvement = synth::InvolvementDistribution::fixed(0.7);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw std::invalid_argument("no methods selected");
  for (const auto& m : methods) parse_method(m);
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (tau_grid.empty()) throw std::invalid_argument("tau_grid is empty");
  for (double t : tau_grid)
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("tau_grid values must lie in [0, 1]");
  double sum = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  if (!(min_involvement >= 0.0 && min_involvement <= 1.0)) throw std::invalid_argument("min_involvement outside [0, 1]");
  if (ece_bins < 1) throw std::invalid_argument("ece_bins must be positive");
  if (ensemble_size < 1) throw std::invalid_argument("ensemble_size must be positive");
  if (mc_passes < 1) throw std::invalid_argument("mc_passes must be positive");
  if (output_dir.empty()) throw std::invalid_argument("output_dir is empty");
  if (dataset_dir.empty()) synth.validate();
  training.validate();
  for (const auto& m : methods)
    if (parse_method(m).family == MethodFamily::mc_dropout && !(training.backbone.dropout_rate > 0.0))
      throw std::invalid_argument("method " + m + " needs dropout_rate > 0");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"data", "dataset_dir", "dataset directory; empty generates synthetic cores"},
      {"data", "split", "train,val,test patient fractions"},
      {"data", "split_seed", "seed for patient split and class balancing"},
      {"data", "min_involvement", "drop cancer cores below this involvement"},
      {"data", "balance", "under-sample the majority class of cores"},
      {"synth", "n_patients", "synthetic patients"},
      {"synth", "cores_per_patient", "cores per patient"},
      {"synth", "patches_per_core", "patches per core"},
      {"synth", "cancer_core_fraction", "share of cancer cores"},
      {"synth", "involvement", "fixed:V | uniform:LO,HI | beta:A,B"},
      {"synth", "ood_fraction", "share of OOD patches in benign cores"},
      {"synth", "class_separation", "relative axial correlation gain of cancer texture"},
      {"synth", "texture_jitter", "log-normal jitter of texture correlation lengths"},
      {"synth", "height", "patch rows"},
      {"synth", "width", "patch columns"},
      {"synth", "synth_seed", "generator seed"},
      {"model", "backbone", "small_cnn | half_resnet18"},
      {"model", "dropout_rate", "dropout before the classifier"},
      {"model", "model_width", "base channel count (0: backbone default)"},
      {"train", "methods", "comma list of edl, ce, mcdropout, ensemble, each optionally +coteach"},
      {"train", "gamma", "co-teaching forget-rate cap"},
      {"train", "max_epochs", "training epochs"},
      {"train", "batch_size", "mini-batch size"},
      {"train", "optimizer", "novograd | adamw"},
      {"train", "learning_rate", "learning rate"},
      {"train", "weight_decay", "decoupled weight decay"},
      {"edl", "kl_anneal_epochs", "epochs to reach full KL weight"},
      {"edl", "kl_max_weight", "final KL weight"},
      {"edl", "activation", "softplus | relu"},
      {"baselines", "ensemble_size", "ensemble members"},
      {"baselines", "mc_passes", "MC dropout passes"},
      {"experiment", "seeds", "comma list of run seeds"},
      {"experiment", "tau_grid", "comma list of confidence thresholds"},
      {"experiment", "ece_bins", "calibration bins"},
      {"experiment", "output_dir", "output directory"},
  };
  return keys;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += fmt(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw std::invalid_argument(key + ": not a number: '" + s + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw std::invalid_argument(key + ": not an integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument(key + ": not a boolean: '" + s + "'");
}

std::string activation_name(edl::Activation a) { return a == edl::Activation::relu ? "relu" : "softplus"; }

edl::Activation activation_from(const std::string& s) {
  if (s == "softplus") return edl::Activation::softplus;
  if (s == "relu") return edl::Activation::relu;
  throw std::invalid_argument("activation: unknown value '" + s + "'");
}

std::string section_of(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.name == key) return k.section;
  throw std::invalid_argument("unknown config key: " + key);
}

}  // namespace

std::string format_involvement(const synth::InvolvementDistribution& d) {
  using K = synth::InvolvementDistribution::Kind;
  switch (d.kind) {
    case K::fixed: return "fixed:" + fmt(d.a);
    case K::uniform: return "uniform:" + fmt(d.a) + "," + fmt(d.b);
    case K::beta: return "beta:" + fmt(d.a) + "," + fmt(d.b);
  }
  return "";
}

synth::InvolvementDistribution parse_involvement(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("involvement: expected kind:params, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const auto params = split_list(text.substr(colon + 1));
  synth::InvolvementDistribution d;
  if (kind == "fixed" && params.size() == 1) {
    d = synth::InvolvementDistribution::fixed(to_double("involvement", params[0]));
  } else if ((kind == "uniform" || kind == "beta") && params.size() == 2) {
    const double a = to_double("involvement", params[0]), b = to_double("involvement", params[1]);
    d = kind == "uniform" ? synth::InvolvementDistribution::uniform(a, b) : synth::InvolvementDistribution::beta(a, b);
  } else {
    throw std::invalid_argument("involvement: cannot parse '" + text + "'");
  }
  d.validate();
  return d;
}

pt::ptree to_ptree(const ExperimentConfig& c) {
  pt::ptree t;
  t.put("data.dataset_dir", c.dataset_dir);
  t.put("data.split", join(std::vector<double>(c.split.begin(), c.split.end())));
  t.put("data.split_seed", std::to_string(c.split_seed));
  t.put("data.min_involvement", fmt(c.min_involvement));
  t.put("data.balance", c.balance ? "true" : "false");
  t.put("synth.n_patients", std::to_string(c.synth.n_patients));
  t.put("synth.cores_per_patient", std::to_string(c.synth.cores_per_patient));
  t.put("synth.patches_per_core", std::to_string(c.synth.patches_per_core));
  t.put("synth.cancer_core_fraction", fmt(c.synth.cancer_core_fraction));
  t.put("synth.involvement", format_involvement(c.synth.involvement));
  t.put("synth.ood_fraction", fmt(c.synth.ood_fraction));
  t.put("synth.class_separation", fmt(c.synth.class_separation));
  t.put("synth.texture_jitter", fmt(c.synth.texture_jitter));
  t.put("synth.height", std::to_string(c.synth.height));
  t.put("synth.width", std::to_string(c.synth.width));
  t.put("synth.synth_seed", std::to_string(c.synth.seed));
  t.put("model.backbone", nn::to_string(c.training.backbone.kind));
  t.put("model.dropout_rate", fmt(c.training.backbone.dropout_rate));
  t.put("model.model_width", std::to_string(c.training.backbone.width));
  std::string methods;
  for (std::size_t i = 0; i < c.methods.size(); ++i) methods += (i ? "," : "") + c.methods[i];
  t.put("train.methods", methods);
  t.put("train.gamma", fmt(c.training.gamma));
  t.put("train.max_epochs", std::to_string(c.training.max_epochs));
  t.put("train.batch_size", std::to_string(c.training.batch_size));
  t.put("train.optimizer", nn::to_string(c.training.optimizer.kind));
  t.put("train.learning_rate", fmt(c.training.optimizer.learning_rate));
  t.put("train.weight_decay", fmt(c.training.optimizer.weight_decay));
  t.put("edl.kl_anneal_epochs", std::to_string(c.training.edl.kl_anneal_epochs));
  t.put("edl.kl_max_weight", fmt(c.training.edl.kl_max_weight));
  t.put("edl.activation", activation_name(c.training.edl.activation));
  t.put("baselines.ensemble_size", std::to_string(c.ensemble_size));
  t.put("baselines.mc_passes", std::to_string(c.mc_passes));
  t.put("experiment.seeds", join(c.seeds));
  t.put("experiment.tau_grid", join(c.tau_grid));
  t.put("experiment.ece_bins", std::to_string(c.ece_bins));
  t.put("experiment.output_dir", c.output_dir);
  return t;
}

ExperimentConfig from_ptree(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      (void)value;
      if (section_of(key) != section) throw std::invalid_argument("key " + key + " does not belong in [" + section + "]");
    }
  }
  // start from the defaults so that missing keys keep their default value
  pt::ptree t = to_ptree(ExperimentConfig{});
  for (const auto& [section, body] : tree)
    for (const auto& [key, value] : body) t.put(section + "." + key, value.data());

  auto get = [&](const std::string& key) { return t.get<std::string>(section_of(key) + "." + key); };
  auto num = [&](const std::string& key) { return to_double(key, get(key)); };
  auto integer = [&](const std::string& key) { return to_integer(key, get(key)); };
  auto count = [&](const std::string& key) {
    const long long v = integer(key);
    if (v < 0) throw std::invalid_argument(key + " must be nonnegative");
    return static_cast<int>(v);
  };
  auto seed = [&](const std::string& key, const std::string& s) {
    const long long v = to_integer(key, s);
    if (v < 0) throw std::invalid_argument(key + " must be nonnegative");
    return static_cast<std::uint64_t>(v);
  };

  ExperimentConfig c;
  c.dataset_dir = get("dataset_dir");
  const auto split = split_list(get("split"));
  if (split.size() != 3) throw std::invalid_argument("split: expected three fractions");
  for (int i = 0; i < 3; ++i) c.split[i] = to_double("split", split[i]);
  c.split_seed = seed("split_seed", get("split_seed"));
  c.min_involvement = num("min_involvement");
  c.balance = to_bool("balance", get("balance"));

  c.synth.n_patients = count("n_patients");
  c.synth.cores_per_patient = count("cores_per_patient");
  c.synth.patches_per_core = count("patches_per_core");
  c.synth.cancer_core_fraction = num("cancer_core_fraction");
  c.synth.involvement = parse_involvement(get("involvement"));
  c.synth.ood_fraction = num("ood_fraction");
  c.synth.class_separation = num("class_separation");
  c.synth.texture_jitter = num("texture_jitter");
  c.synth.height = count("height");
  c.synth.width = count("width");
  c.synth.seed = seed("synth_seed", get("synth_seed"));

  c.training.backbone.kind = nn::backbone_kind_from_string(get("backbone"));
  c.training.backbone.dropout_rate = num("dropout_rate");
  c.training.backbone.width = count("model_width");
  c.training.backbone.input_rows = c.synth.height;
  c.training.backbone.input_cols = c.synth.width;

  c.methods = split_list(get("methods"));
  c.training.gamma = num("gamma");
  c.training.max_epochs = count("max_epochs");
  c.training.batch_size = count("batch_size");
  c.training.optimizer.kind = nn::optimizer_kind_from_string(get("optimizer"));
  c.training.optimizer.learning_rate = num("learning_rate");
  c.training.optimizer.weight_decay = num("weight_decay");
  c.training.edl.kl_anneal_epochs = count("kl_anneal_epochs");
  c.training.edl.kl_max_weight = num("kl_max_weight");
  c.training.edl.activation = activation_from(get("activation"));
  c.ensemble_size = count("ensemble_size");
  c.mc_passes = count("mc_passes");

  c.seeds.clear();
  for (const auto& s : split_list(get("seeds"))) c.seeds.push_back(seed("seeds", s));
  c.tau_grid.clear();
  for (const auto& s : split_list(get("tau_grid"))) c.tau_grid.push_back(to_double("tau_grid", s));
  c.ece_bins = count("ece_bins");
  c.output_dir = get("output_dir");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides) {
  pt::ptree tree;
  if (!path.empty()) {
    try {
      pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
      throw std::runtime_error("cannot read config: " + std::string(e.what()));
    }
  }
  for (const auto& [key, value] : overrides) tree.put(section_of(key) + "." + key, value);
  return from_ptree(tree);
}

ExperimentConfig load_config(const std::map<std::string, std::string>& overrides) { return load_config({}, overrides); }

void write_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  pt::write_ini(path.string(), to_ptree(config));
}

}  // namespace evicore::cli
