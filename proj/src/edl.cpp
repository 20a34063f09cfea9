#include "evicore/edl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace evicore::edl {

void EdlLossConfig::validate() const {
  if (kl_anneal_epochs < 1) throw std::invalid_argument("kl_anneal_epochs must be at least 1");
  if (!(kl_max_weight >= 0.0)) throw std::invalid_argument("kl_max_weight must be nonnegative");
}

double evidence_from_logit(double x, Activation activation) {
  if (activation == Activation::relu) return x > 0.0 ? x : 0.0;
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double evidence_derivative(double x, Activation activation) {
  if (activation == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

nn::Tensor logits_to_evidence(const nn::Tensor& logits, Activation activation) {
  nn::Tensor e = logits;
  for (auto& v : e.values()) v = evidence_from_logit(v, activation);
  return e;
}

EvidenceOutput evidence_to_output(Evidence e) {
  if (!(e[0] >= 0.0) || !(e[1] >= 0.0)) throw std::invalid_argument("evidence must be nonnegative");
  const double s = e[0] + e[1] + 2.0;
  EvidenceOutput out;
  out.evidence = e;
  out.belief = {e[0] / s, e[1] / s};
  out.uncertainty = 2.0 / s;
  out.predicted_label = e[1] > e[0] ? Label::cancer : Label::benign;
  out.confidence = 1.0 - out.uncertainty;
  return out;
}

double bayes_risk_loss(Evidence e, Label y) {
  const double a[2] = {e[0] + 1.0, e[1] + 1.0};
  const double s = a[0] + a[1];
  const int t = to_int(y);
  double loss = 0.0;
  for (int j = 0; j < 2; ++j) {
    const double target = j == t ? 1.0 : 0.0;
    const double p = a[j] / s;
    loss += (target - p) * (target - p) + a[j] * (s - a[j]) / (s * s * (s + 1.0));
  }
  return loss;
}

Evidence bayes_risk_grad(Evidence e, Label y) {
  const double a[2] = {e[0] + 1.0, e[1] + 1.0};
  const double s = a[0] + a[1];
  const double p[2] = {a[0] / s, a[1] / s};
  const int t = to_int(y);
  const double sum_p2 = p[0] * p[0] + p[1] * p[1];
  Evidence g{};
  for (int k = 0; k < 2; ++k) {
    double d_err = 0.0, d_sq = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double dp = ((j == k ? 1.0 : 0.0) - p[j]) / s;
      const double target = j == t ? 1.0 : 0.0;
      d_err += 2.0 * (p[j] - target) * dp;
      d_sq += 2.0 * p[j] * dp;
    }
    // variance term: (1 - sum p^2) / (S + 1)
    g[k] = d_err - d_sq / (s + 1.0) - (1.0 - sum_p2) / ((s + 1.0) * (s + 1.0));
  }
  return g;
}

double kl_to_uniform(Evidence alpha) {
  using boost::math::digamma;
  const double s = alpha[0] + alpha[1];
  double kl = std::lgamma(s) - std::lgamma(alpha[0]) - std::lgamma(alpha[1]);  // - lgamma(2) = 0
  for (double a : alpha) kl += (a - 1.0) * (digamma(a) - digamma(s));
  return kl;
}

Evidence kl_to_uniform_grad(Evidence alpha) {
  using boost::math::trigamma;
  const double s = alpha[0] + alpha[1];
  const double ts = trigamma(s);
  return {(alpha[0] - 1.0) * trigamma(alpha[0]) - (s - 2.0) * ts,
          (alpha[1] - 1.0) * trigamma(alpha[1]) - (s - 2.0) * ts};
}

double kl_weight(int epoch, const EdlLossConfig& config) {
  config.validate();
  if (epoch <= 0) return 0.0;
  return config.kl_max_weight * std::min(1.0, static_cast<double>(epoch) / config.kl_anneal_epochs);
}

namespace {

Evidence misleading_alpha(Evidence e, Label y) {
  Evidence a{e[0] + 1.0, e[1] + 1.0};
  a[to_int(y)] = 1.0;
  return a;
}

}  // namespace

double kl_regularizer(Evidence e, Label y, int epoch, const EdlLossConfig& config) {
  if (!(e[0] >= 0.0) || !(e[1] >= 0.0)) throw std::invalid_argument("evidence must be nonnegative");
  const double w = kl_weight(epoch, config);
  if (w == 0.0) return 0.0;
  return w * kl_to_uniform(misleading_alpha(e, y));
}

Evidence kl_regularizer_grad(Evidence e, Label y, int epoch, const EdlLossConfig& config) {
  const double w = kl_weight(epoch, config);
  if (w == 0.0) return {0.0, 0.0};
  Evidence g = kl_to_uniform_grad(misleading_alpha(e, y));
  g[0] *= w;
  g[1] *= w;
  g[to_int(y)] = 0.0;  // reset component is constant
  return g;
}

PerSampleLoss edl_per_sample(const nn::Tensor& logits, std::span<const Label> labels, int epoch,
                             const EdlLossConfig& config) {
  config.validate();
  const int n = logits.n();
  if (logits.sample_size() != 2) throw std::invalid_argument("edl loss expects n x 2 logits");
  if (labels.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("edl loss: label count mismatch");
  PerSampleLoss out{std::vector<double>(n), nn::Tensor(n, 2, 1, 1)};
  for (int i = 0; i < n; ++i) {
    const double x[2] = {logits[2 * i], logits[2 * i + 1]};
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw std::invalid_argument("edl loss: non-finite logits");
    const Evidence e{evidence_from_logit(x[0], config.activation), evidence_from_logit(x[1], config.activation)};
    out.loss[i] = bayes_risk_loss(e, labels[i]) + kl_regularizer(e, labels[i], epoch, config);
    const Evidence gr = bayes_risk_grad(e, labels[i]);
    const Evidence gk = kl_regularizer_grad(e, labels[i], epoch, config);
    for (int j = 0; j < 2; ++j) out.grad[2 * i + j] = (gr[j] + gk[j]) * evidence_derivative(x[j], config.activation);
  }
  return out;
}

double edl_total_loss(const nn::Tensor& logits, std::span<const Label> labels, int epoch, const EdlLossConfig& config) {
  if (logits.n() == 0) throw std::invalid_argument("edl_total_loss: empty batch");
  const auto per = edl_per_sample(logits, labels, epoch, config);
  double s = 0.0;
  for (double l : per.loss) s += l;
  return s / static_cast<double>(per.loss.size());
}

}  // namespace evicore::edl
