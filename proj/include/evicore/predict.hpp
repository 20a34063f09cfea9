#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "evicore/domain.hpp"
#include "evicore/edl.hpp"
#include "evicore/eval.hpp"
#include "evicore/nn/backbone.hpp"

namespace evicore {

/// Per-patch probability, confidence in [0, 1] and hard label (cancer iff prob > 0.5).
struct ProbOutput {
  double prob_cancer = 0.5;
  double confidence = 0.0;
  Label predicted_label = Label::benign;
};

/// 1 - H(p) / ln 2 for the binary entropy H; 0 at p = 0.5 and 1 at p in {0, 1}.
double entropy_confidence(double prob_cancer);

/// ProbOutput from a probability, with entropy-based confidence.
ProbOutput prob_output(double prob_cancer);

nn::Tensor batch_from_images(std::span<const Image* const> images);

/// Scores a batch of patches. Implementations may mutate model state (dropout streams).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<ProbOutput> predict(const nn::Tensor& batch) = 0;
};

/// Single deterministic pass; prob = (e1 + 1) / S, confidence = 1 - U.
class EvidentialPredictor final : public Predictor {
 public:
  explicit EvidentialPredictor(nn::Backbone& model, edl::Activation activation = edl::Activation::softplus)
      : model_(model), activation_(activation) {}
  std::vector<ProbOutput> predict(const nn::Tensor& batch) override;
  /// Full evidential output per sample.
  std::vector<EvidenceOutput> evidence(const nn::Tensor& batch);

 private:
  nn::Backbone& model_;
  edl::Activation activation_;
};

/// Single deterministic softmax pass with entropy-based confidence.
class SoftmaxPredictor final : public Predictor {
 public:
  explicit SoftmaxPredictor(nn::Backbone& model) : model_(model) {}
  std::vector<ProbOutput> predict(const nn::Tensor& batch) override;

 private:
  nn::Backbone& model_;
};

/// Runs `predictor` over every patch of `cores` in batches and attaches core ids, weak labels
/// and, when an oracle is given, the hidden truth.
std::vector<eval::PatchPrediction> predict_cores(Predictor& predictor, std::span<const BiopsyCore> cores,
                                                 const OracleView* oracle = nullptr, int batch_size = 256);

}  // namespace evicore
