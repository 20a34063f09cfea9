#pragma once

#include <memory>
#include <string>
#include <vector>

#include "evicore/nn/layers.hpp"

namespace evicore::nn {

enum class OptimizerKind { novograd, adamw };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::novograd;
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  double eps = 1e-8;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update from the accumulated gradients. The parameter list must be the same
  /// (same order, same shapes) on every call.
  virtual void step(const std::vector<ParamRef>& params) = 0;
  virtual std::unique_ptr<Optimizer> clone() const = 0;
};

/// NovoGrad: layer-wise second moment of the gradient norm, decoupled weight decay added to
/// the normalized gradient before momentum (beta1 0.95, beta2 0.98).
class NovoGrad final : public Optimizer {
 public:
  explicit NovoGrad(const OptimizerConfig& cfg, double beta1 = 0.95, double beta2 = 0.98);
  void step(const std::vector<ParamRef>& params) override;
  std::unique_ptr<Optimizer> clone() const override { return std::make_unique<NovoGrad>(*this); }

 private:
  OptimizerConfig cfg_;
  double beta1_, beta2_;
  std::vector<double> v_;
  std::vector<std::vector<double>> m_;
  bool started_ = false;
};

/// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  explicit AdamW(const OptimizerConfig& cfg, double beta1 = 0.9, double beta2 = 0.999);
  void step(const std::vector<ParamRef>& params) override;
  std::unique_ptr<Optimizer> clone() const override { return std::make_unique<AdamW>(*this); }

 private:
  OptimizerConfig cfg_;
  double beta1_, beta2_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg);

}  // namespace evicore::nn
