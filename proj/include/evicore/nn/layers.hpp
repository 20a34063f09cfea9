#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evicore/nn/tensor.hpp"

namespace evicore::nn {

using Rng = std::mt19937_64;

struct RunContext {
  bool batch_stats = false;  // batch norm uses (and updates) batch statistics
  bool dropout = false;      // dropout masks are sampled
  Rng* rng = nullptr;
};

struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

struct BufferRef {
  std::string name;
  Tensor* value = nullptr;
};

/// A differentiable layer. forward() caches what backward() needs; backward() accumulates
/// parameter gradients and returns the gradient w.r.t. the layer input.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, RunContext& ctx) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void init(Rng& /*rng*/) {}
  virtual void collect_parameters(const std::string& /*prefix*/, std::vector<ParamRef>& /*out*/) {}
  virtual void collect_buffers(const std::string& /*prefix*/, std::vector<BufferRef>& /*out*/) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string describe() const = 0;
  virtual int residual_blocks() const { return 0; }
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias);
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string describe() const override;

 private:
  int in_, out_, k_, stride_, pad_;
  bool has_bias_;
  Tensor weight_, bias_, grad_weight_, grad_bias_;
  std::array<int, 4> in_shape_{};
  int out_h_ = 0, out_w_ = 0;
  std::vector<Scalar> cols_;
};

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features);
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }
  std::string describe() const override;

 private:
  int in_, out_;
  Tensor weight_, bias_, grad_weight_, grad_bias_;
  Tensor input_;
};

class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, Scalar momentum = 0.1, Scalar eps = 1e-5);
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }
  std::string describe() const override;

 private:
  int channels_;
  Scalar momentum_, eps_;
  Tensor gamma_, beta_, grad_gamma_, grad_beta_;
  Tensor running_mean_, running_var_;
  Tensor xhat_;
  std::vector<Scalar> inv_std_;
  bool used_batch_stats_ = false;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
  std::string describe() const override { return "relu"; }

 private:
  Tensor output_;
};

class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(int size) : size_(size) {}
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  std::string describe() const override { return "maxpool" + std::to_string(size_); }

 private:
  int size_;
  std::array<int, 4> in_shape_{};
  std::vector<std::size_t> argmax_;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
  std::string describe() const override { return "global_avg_pool"; }

 private:
  std::array<int, 4> in_shape_{};
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
  std::string describe() const override { return "flatten"; }

 private:
  std::array<int, 4> in_shape_{};
};

/// Inverted dropout: kept activations are scaled by 1 / (1 - rate).
class Dropout final : public Layer {
 public:
  explicit Dropout(Scalar rate) : rate_(rate) {}
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
  std::string describe() const override { return "dropout(" + std::to_string(rate_) + ")"; }

 private:
  Scalar rate_;
  std::vector<Scalar> mask_;
  bool active_ = false;
};

/// ResNet basic block: conv3x3-bn-relu-conv3x3-bn plus (projected) shortcut, then relu.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(int in_channels, int out_channels, int stride);
  ResidualBlock(const ResidualBlock& other);
  Tensor forward(const Tensor& x, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }
  std::string describe() const override;
  int residual_blocks() const override { return 1; }

 private:
  int in_, out_, stride_;
  std::vector<std::unique_ptr<Layer>> main_;      // conv1 bn1 relu conv2 bn2
  std::vector<std::unique_ptr<Layer>> shortcut_;  // empty, or conv1x1 bn
  Tensor output_;
};

}  // namespace evicore::nn
