#pragma once

#include <span>
#include <string>

#include "evicore/edl.hpp"

namespace evicore {

enum class LossKind { edl, cross_entropy };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Numerically stable two-class softmax of one logit row; returns P(cancer).
double softmax_cancer_probability(double logit_benign, double logit_cancer);

/// Softmax cross-entropy per row, with gradients w.r.t. the logits.
edl::PerSampleLoss cross_entropy_per_sample(const nn::Tensor& logits, std::span<const Label> labels);

edl::PerSampleLoss per_sample_loss(LossKind kind, const nn::Tensor& logits, std::span<const Label> labels, int epoch,
                                   const edl::EdlLossConfig& edl_config);

}  // namespace evicore
