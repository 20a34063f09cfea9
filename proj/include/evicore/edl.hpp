#pragma once

#include <array>
#include <span>
#include <vector>

#include "evicore/domain.hpp"
#include "evicore/nn/tensor.hpp"

namespace evicore::edl {

using Evidence = std::array<double, 2>;

enum class Activation { softplus, relu };

struct EdlLossConfig {
  int kl_anneal_epochs = 10;
  double kl_max_weight = 1.0;
  Activation activation = Activation::softplus;

  void validate() const;
};

/// log(1 + exp(x)), evaluated without overflow; or max(0, x) for the rectifier variant.
double evidence_from_logit(double logit, Activation activation = Activation::softplus);
/// d evidence / d logit.
double evidence_derivative(double logit, Activation activation = Activation::softplus);

/// Elementwise mapping of an n x 2 logit tensor to nonnegative evidence.
nn::Tensor logits_to_evidence(const nn::Tensor& logits, Activation activation = Activation::softplus);

/// S = e0 + e1 + 2, b = e / S, U = 2 / S; argmax with ties going to benign.
EvidenceOutput evidence_to_output(Evidence e);

/// Expected squared error E_{p ~ Beta(e0 + 1, e1 + 1)} sum_j (y_j - p_j)^2 in closed form.
double bayes_risk_loss(Evidence e, Label y);
Evidence bayes_risk_grad(Evidence e, Label y);

/// KL(Beta(a0, a1) || Beta(1, 1)).
double kl_to_uniform(Evidence alpha);
/// d KL / d alpha.
Evidence kl_to_uniform_grad(Evidence alpha);

/// Annealing weight min(1, epoch / kl_anneal_epochs) * kl_max_weight.
double kl_weight(int epoch, const EdlLossConfig& config);

/// Weighted KL of the misleading-evidence Beta (true-class parameter reset to 1) from uniform.
double kl_regularizer(Evidence e, Label y, int epoch, const EdlLossConfig& config);
Evidence kl_regularizer_grad(Evidence e, Label y, int epoch, const EdlLossConfig& config);

struct PerSampleLoss {
  std::vector<double> loss;  // one entry per row
  nn::Tensor grad;           // row i: d loss_i / d logits_i
};

/// Bayes risk plus weighted KL for every row of an n x 2 logit tensor.
PerSampleLoss edl_per_sample(const nn::Tensor& logits, std::span<const Label> labels, int epoch,
                             const EdlLossConfig& config);

/// Batch mean of edl_per_sample. Throws on an empty batch.
double edl_total_loss(const nn::Tensor& logits, std::span<const Label> labels, int epoch, const EdlLossConfig& config);

}  // namespace evicore::edl
