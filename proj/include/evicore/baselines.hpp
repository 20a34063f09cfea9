#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evicore/coteach.hpp"
#include "evicore/predict.hpp"

namespace evicore::baselines {

/// T stochastic passes with dropout active (batch norm on running statistics); mean softmax
/// probability with entropy confidence.
std::vector<ProbOutput> mc_dropout_predict(nn::Backbone& model, const nn::Tensor& batch, int passes,
                                           std::uint64_t seed);

/// Mean member softmax probability with entropy confidence.
std::vector<ProbOutput> ensemble_predict(std::span<nn::Backbone> models, const nn::Tensor& batch);

class McDropoutPredictor final : public Predictor {
 public:
  McDropoutPredictor(nn::Backbone& model, int passes, std::uint64_t seed);
  std::vector<ProbOutput> predict(const nn::Tensor& batch) override;

 private:
  nn::Backbone& model_;
  int passes_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

class EnsemblePredictor final : public Predictor {
 public:
  explicit EnsemblePredictor(std::span<nn::Backbone> models);
  std::vector<ProbOutput> predict(const nn::Tensor& batch) override { return ensemble_predict(models_, batch); }

 private:
  std::span<nn::Backbone> models_;
};

enum class BaselineKind { softmax, mc_dropout, ensemble };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::softmax;
  int ensemble_size = 5;
  int mc_passes = 20;
  coteach::CoteachConfig training;  // loss_kind is forced to cross_entropy

  void validate() const;
};

/// One model (softmax, mc_dropout) or ensemble_size independently seeded models, each trained
/// with cross-entropy through the co-teaching trainer (plain training when co_teaching is off).
std::vector<nn::Backbone> train_baseline(std::span<const BiopsyCore> train_cores,
                                         std::span<const BiopsyCore> val_cores, const BaselineConfig& config,
                                         std::uint64_t seed, const coteach::EpochSink& sink = {});

}  // namespace evicore::baselines
