#include "evicore/baselines.hpp"

#include <stdexcept>

#include "evicore/losses.hpp"
#include "evicore/texture.hpp"

namespace evicore::baselines {

namespace {

std::vector<double> softmax_probs(const nn::Tensor& logits) {
  std::vector<double> p(logits.n());
  for (int i = 0; i < logits.n(); ++i) p[i] = softmax_cancer_probability(logits[2 * i], logits[2 * i + 1]);
  return p;
}

std::vector<ProbOutput> to_outputs(const std::vector<double>& sum, double count) {
  std::vector<ProbOutput> out;
  out.reserve(sum.size());
  for (double s : sum) out.push_back(prob_output(s / count));
  return out;
}

}  // namespace

std::vector<ProbOutput> mc_dropout_predict(nn::Backbone& model, const nn::Tensor& batch, int passes,
                                           std::uint64_t seed) {
  if (!(model.config().dropout_rate > 0.0)) throw std::invalid_argument("mc_dropout_predict: model has no dropout");
  if (passes < 1) throw std::invalid_argument("mc_dropout_predict: need at least one pass");
  model.reseed_dropout(seed);
  std::vector<double> sum(batch.n(), 0.0);
  for (int t = 0; t < passes; ++t) {
    const auto p = softmax_probs(model.forward(batch, nn::Mode::mc_dropout));
    for (std::size_t i = 0; i < p.size(); ++i) sum[i] += p[i];
  }
  return to_outputs(sum, passes);
}

std::vector<ProbOutput> ensemble_predict(std::span<nn::Backbone> models, const nn::Tensor& batch) {
  if (models.empty()) throw std::invalid_argument("ensemble_predict: empty ensemble");
  for (const auto& m : models)
    if (m.fingerprint() != models.front().fingerprint())
      throw std::invalid_argument("ensemble_predict: members differ in architecture");
  std::vector<double> sum(batch.n(), 0.0);
  for (auto& m : models) {
    const auto p = softmax_probs(m.forward(batch, nn::Mode::eval));
    for (std::size_t i = 0; i < p.size(); ++i) sum[i] += p[i];
  }
  return to_outputs(sum, static_cast<double>(models.size()));
}

McDropoutPredictor::McDropoutPredictor(nn::Backbone& model, int passes, std::uint64_t seed)
    : model_(model), passes_(passes), seed_(seed) {
  if (!(model.config().dropout_rate > 0.0)) throw std::invalid_argument("McDropoutPredictor: model has no dropout");
  if (passes < 1) throw std::invalid_argument("McDropoutPredictor: need at least one pass");
}

std::vector<ProbOutput> McDropoutPredictor::predict(const nn::Tensor& batch) {
  return mc_dropout_predict(model_, batch, passes_, synth::substream(seed_, calls_++, 20)());
}

EnsemblePredictor::EnsemblePredictor(std::span<nn::Backbone> models) : models_(models) {
  if (models.empty()) throw std::invalid_argument("EnsemblePredictor: empty ensemble");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::softmax: return "softmax";
    case BaselineKind::mc_dropout: return "mc_dropout";
    case BaselineKind::ensemble: return "ensemble";
  }
  return "?";
}

BaselineKind baseline_kind_from_string(const std::string& name) {
  if (name == "softmax") return BaselineKind::softmax;
  if (name == "mc_dropout") return BaselineKind::mc_dropout;
  if (name == "ensemble") return BaselineKind::ensemble;
  throw std::invalid_argument("unknown baseline: " + name);
}

void BaselineConfig::validate() const {
  if (kind == BaselineKind::ensemble && ensemble_size < 1) throw std::invalid_argument("ensemble_size must be >= 1");
  if (kind == BaselineKind::mc_dropout) {
    if (mc_passes < 1) throw std::invalid_argument("mc_passes must be >= 1");
    if (!(training.backbone.dropout_rate > 0.0)) throw std::invalid_argument("mc_dropout needs dropout_rate > 0");
  }
  training.validate();
}

std::vector<nn::Backbone> train_baseline(std::span<const BiopsyCore> train_cores,
                                         std::span<const BiopsyCore> val_cores, const BaselineConfig& config,
                                         std::uint64_t seed, const coteach::EpochSink& sink) {
  config.validate();
  auto training = config.training;
  training.loss_kind = LossKind::cross_entropy;
  const int members = config.kind == BaselineKind::ensemble ? config.ensemble_size : 1;
  std::vector<nn::Backbone> out;
  out.reserve(members);
  for (int m = 0; m < members; ++m) {
    const std::uint64_t member_seed = members == 1 ? seed : synth::substream(seed, m, 30)();
    out.push_back(coteach::train(train_cores, val_cores, training, member_seed, sink).best);
  }
  return out;
}

}  // namespace evicore::baselines
