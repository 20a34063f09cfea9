#include "evicore/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace evicore::nn {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::novograd ? "novograd" : "adamw"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "novograd") return OptimizerKind::novograd;
  if (name == "adamw") return OptimizerKind::adamw;
  throw std::invalid_argument("unknown optimizer: " + name);
}

NovoGrad::NovoGrad(const OptimizerConfig& cfg, double beta1, double beta2) : cfg_(cfg), beta1_(beta1), beta2_(beta2) {
  if (!(cfg.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
}

void NovoGrad::step(const std::vector<ParamRef>& params) {
  if (!started_) {
    v_.assign(params.size(), 0.0);
    m_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) m_[i].assign(params[i].value->size(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad->values();
    auto& w = params[i].value->values();
    double norm2 = 0.0;
    for (double x : g) norm2 += x * x;
    v_[i] = started_ ? beta2_ * v_[i] + (1.0 - beta2_) * norm2 : norm2;
    const double denom = std::sqrt(v_[i]) + cfg_.eps;
    auto& m = m_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double update = g[j] / denom + cfg_.weight_decay * w[j];
      m[j] = started_ ? beta1_ * m[j] + update : update;
      w[j] -= cfg_.learning_rate * m[j];
    }
  }
  started_ = true;
}

AdamW::AdamW(const OptimizerConfig& cfg, double beta1, double beta2) : cfg_(cfg), beta1_(beta1), beta2_(beta2) {
  if (!(cfg.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
}

void AdamW::step(const std::vector<ParamRef>& params) {
  if (t_ == 0) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value->size(), 0.0);
      v_[i].assign(params[i].value->size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad->values();
    auto& w = params[i].value->values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double step = (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
      w[j] -= cfg_.learning_rate * (step + cfg_.weight_decay * w[j]);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg) {
  switch (cfg.kind) {
    case OptimizerKind::novograd: return std::make_unique<NovoGrad>(cfg);
    case OptimizerKind::adamw: return std::make_unique<AdamW>(cfg);
  }
  throw std::invalid_argument("unknown optimizer kind");
}

}  // namespace evicore::nn
