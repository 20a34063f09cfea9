#include "evicore/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "evicore/losses.hpp"

namespace evicore {

double entropy_confidence(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  auto term = [](double q) { return q > 0.0 ? -q * std::log(q) : 0.0; };
  const double h = term(p) + term(1.0 - p);
  return std::clamp(1.0 - h / std::numbers::ln2, 0.0, 1.0);
}

ProbOutput prob_output(double p) {
  return {p, entropy_confidence(p), p > 0.5 ? Label::cancer : Label::benign};
}

nn::Tensor batch_from_images(std::span<const Image* const> images) {
  if (images.empty()) return nn::Tensor(0, 1, 1, 1);
  const int h = images.front()->rows(), w = images.front()->cols();
  nn::Tensor t(static_cast<int>(images.size()), 1, h, w);
  nn::Scalar* dst = t.data();
  for (const Image* img : images) {
    if (img->rows() != h || img->cols() != w) throw std::invalid_argument("batch_from_images: mixed patch sizes");
    for (float v : img->values()) *dst++ = v;
  }
  return t;
}

std::vector<EvidenceOutput> EvidentialPredictor::evidence(const nn::Tensor& batch) {
  const nn::Tensor logits = model_.forward(batch, nn::Mode::eval);
  std::vector<EvidenceOutput> out(logits.n());
  for (int i = 0; i < logits.n(); ++i)
    out[i] = edl::evidence_to_output({edl::evidence_from_logit(logits[2 * i], activation_),
                                      edl::evidence_from_logit(logits[2 * i + 1], activation_)});
  return out;
}

std::vector<ProbOutput> EvidentialPredictor::predict(const nn::Tensor& batch) {
  std::vector<ProbOutput> out;
  for (const auto& ev : evidence(batch)) {
    const double s = ev.evidence[0] + ev.evidence[1] + 2.0;
    out.push_back({(ev.evidence[1] + 1.0) / s, ev.confidence, ev.predicted_label});
  }
  return out;
}

std::vector<ProbOutput> SoftmaxPredictor::predict(const nn::Tensor& batch) {
  const nn::Tensor logits = model_.forward(batch, nn::Mode::eval);
  std::vector<ProbOutput> out(logits.n());
  for (int i = 0; i < logits.n(); ++i) out[i] = prob_output(softmax_cancer_probability(logits[2 * i], logits[2 * i + 1]));
  return out;
}

std::vector<eval::PatchPrediction> predict_cores(Predictor& predictor, std::span<const BiopsyCore> cores,
                                                 const OracleView* oracle, int batch_size) {
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  std::vector<eval::PatchPrediction> out;
  std::vector<const Image*> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    const auto scores = predictor.predict(batch_from_images(pending));
    const std::size_t base = out.size() - pending.size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out[base + i].prob_cancer = scores[i].prob_cancer;
      out[base + i].confidence = scores[i].confidence;
      out[base + i].predicted_label = scores[i].predicted_label;
    }
    pending.clear();
  };

  for (const auto& core : cores) {
    const std::vector<PatchTruth>* truth =
        oracle && oracle->contains(core.core_id()) ? &oracle->core(core.core_id()) : nullptr;
    for (std::size_t k = 0; k < core.size(); ++k) {
      eval::PatchPrediction p;
      p.core_id = core.core_id();
      p.weak_label = core.weak_label();
      if (truth) {
        p.true_label = (*truth)[k].true_label;
        p.is_ood = (*truth)[k].is_ood;
      }
      out.push_back(std::move(p));
      pending.push_back(&core.patches()[k].pixels);
      if (static_cast<int>(pending.size()) == batch_size) flush();
    }
  }
  flush();
  return out;
}

}  // namespace evicore
