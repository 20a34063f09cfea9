#include "evicore/nn/backbone.hpp"

#include <stdexcept>

namespace evicore::nn {

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::small_cnn ? "small_cnn" : "half_resnet18";
}

BackboneKind backbone_kind_from_string(const std::string& name) {
  if (name == "small_cnn") return BackboneKind::small_cnn;
  if (name == "half_resnet18") return BackboneKind::half_resnet18;
  throw std::invalid_argument("unknown backbone kind: " + name);
}

int BackboneConfig::base_width() const {
  if (width > 0) return width;
  return kind == BackboneKind::small_cnn ? 8 : 64;
}

void BackboneConfig::validate() const {
  if (output_dim != 2) throw std::invalid_argument("BackboneConfig: output_dim must be 2 for the binary task");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("BackboneConfig: dropout_rate must lie in [0, 1)");
  if (input_rows < 8 || input_cols < 8) throw std::invalid_argument("BackboneConfig: input must be at least 8x8");
  if (width < 0) throw std::invalid_argument("BackboneConfig: width must be nonnegative");
}

namespace {

std::vector<std::unique_ptr<Layer>> build_layers(const BackboneConfig& cfg) {
  std::vector<std::unique_ptr<Layer>> layers;
  const int w = cfg.base_width();
  if (cfg.kind == BackboneKind::small_cnn) {
    int channels = 1, rows = cfg.input_rows, cols = cfg.input_cols;
    for (int block = 0; block < 3; ++block) {
      const int out = w << block;
      layers.push_back(std::make_unique<Conv2d>(channels, out, 3, 1, 1, true));
      layers.push_back(std::make_unique<ReLU>());
      layers.push_back(std::make_unique<MaxPool2d>(2));
      channels = out;
      rows /= 2;
      cols /= 2;
    }
    layers.push_back(std::make_unique<Flatten>());
    layers.push_back(std::make_unique<Dropout>(cfg.dropout_rate));
    layers.push_back(std::make_unique<Linear>(channels * rows * cols, cfg.output_dim));
  } else {
    layers.push_back(std::make_unique<Conv2d>(1, w, 3, 1, 1, false));
    layers.push_back(std::make_unique<BatchNorm2d>(w));
    layers.push_back(std::make_unique<ReLU>());
    int channels = w;
    const int strides[] = {1, 2, 2, 2};
    for (int stage = 0; stage < 4; ++stage) {
      const int out = w << stage;
      layers.push_back(std::make_unique<ResidualBlock>(channels, out, strides[stage]));
      channels = out;
    }
    layers.push_back(std::make_unique<GlobalAvgPool>());
    layers.push_back(std::make_unique<Flatten>());
    layers.push_back(std::make_unique<Dropout>(cfg.dropout_rate));
    layers.push_back(std::make_unique<Linear>(channels, cfg.output_dim));
  }
  return layers;
}

}  // namespace

Backbone::Backbone(const BackboneConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  layers_ = build_layers(config_);
  Rng init_rng(seed);
  for (auto& l : layers_) l->init(init_rng);
  reseed_dropout(seed ^ 0x9e3779b97f4a7c15ULL);
}

Backbone::Backbone(const Backbone& other) : config_(other.config_), dropout_rng_(other.dropout_rng_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Backbone& Backbone::operator=(const Backbone& other) {
  if (this != &other) {
    Backbone copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Backbone::reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

Tensor Backbone::forward(const Tensor& batch, Mode mode) {
  if (batch.c() != 1 || batch.h() != config_.input_rows || batch.w() != config_.input_cols)
    throw std::invalid_argument("Backbone: batch shape " + batch.shape_string() + " does not match input size " +
                                std::to_string(config_.input_rows) + "x" + std::to_string(config_.input_cols));
  if (batch.n() == 0) return Tensor(0, config_.output_dim, 1, 1);
  RunContext ctx;
  ctx.batch_stats = mode == Mode::train;
  ctx.dropout = mode != Mode::eval;
  ctx.rng = &dropout_rng_;
  Tensor h = batch;
  for (auto& l : layers_) h = l->forward(h, ctx);
  return h;
}

void Backbone::backward(const Tensor& grad_logits) {
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

std::vector<ParamRef> Backbone::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_parameters("layers." + std::to_string(i) + ".", out);
  return out;
}

std::vector<BufferRef> Backbone::buffers() {
  std::vector<BufferRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_buffers("layers." + std::to_string(i) + ".", out);
  return out;
}

void Backbone::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(0);
}

std::size_t Backbone::parameter_count() {
  std::size_t n = 0;
  for (auto& p : parameters()) n += p.value->size();
  return n;
}

std::vector<std::string> Backbone::fingerprint() const {
  std::vector<std::string> out;
  for (const auto& l : layers_) out.push_back(l->describe());
  return out;
}

int Backbone::residual_block_count() const {
  int n = 0;
  for (const auto& l : layers_) n += l->residual_blocks();
  return n;
}

Backbone clone_with_new_init(const BackboneConfig& config, std::uint64_t seed) { return Backbone(config, seed); }

}  // namespace evicore::nn
