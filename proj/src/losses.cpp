#include "evicore/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace evicore {

std::string to_string(LossKind kind) { return kind == LossKind::edl ? "edl" : "cross_entropy"; }

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "edl") return LossKind::edl;
  if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
  throw std::invalid_argument("unknown loss kind: " + name);
}

double softmax_cancer_probability(double logit_benign, double logit_cancer) {
  const double d = logit_cancer - logit_benign;
  return d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
}

edl::PerSampleLoss cross_entropy_per_sample(const nn::Tensor& logits, std::span<const Label> labels) {
  const int n = logits.n();
  if (logits.sample_size() != 2) throw std::invalid_argument("cross entropy expects n x 2 logits");
  if (labels.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("cross entropy: label count mismatch");
  edl::PerSampleLoss out{std::vector<double>(n), nn::Tensor(n, 2, 1, 1)};
  for (int i = 0; i < n; ++i) {
    const double a = logits[2 * i], b = logits[2 * i + 1];
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    const int t = to_int(labels[i]);
    out.loss[i] = lse - (t == 0 ? a : b);
    const double p1 = softmax_cancer_probability(a, b);
    out.grad[2 * i] = (1.0 - p1) - (t == 0 ? 1.0 : 0.0);
    out.grad[2 * i + 1] = p1 - (t == 1 ? 1.0 : 0.0);
  }
  return out;
}

edl::PerSampleLoss per_sample_loss(LossKind kind, const nn::Tensor& logits, std::span<const Label> labels, int epoch,
                                   const edl::EdlLossConfig& edl_config) {
  if (kind == LossKind::edl) return edl::edl_per_sample(logits, labels, epoch, edl_config);
  return cross_entropy_per_sample(logits, labels);
}

}  // namespace evicore
