#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evicore/nn/layers.hpp"

namespace evicore::nn {

enum class BackboneKind { small_cnn, half_resnet18 };

std::string to_string(BackboneKind kind);
BackboneKind backbone_kind_from_string(const std::string& name);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::small_cnn;
  double dropout_rate = 0.0;
  int input_rows = 32;
  int input_cols = 32;
  int output_dim = 2;
  int width = 0;  // base channel count; 0 picks 8 (small_cnn) or 64 (half_resnet18)

  int base_width() const;
  void validate() const;
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

enum class Mode {
  eval,        // running statistics, no dropout
  train,       // batch statistics, dropout
  mc_dropout,  // running statistics, dropout
};

/// Sequential classifier producing unconstrained n x output_dim logits.
///
/// small_cnn: three conv3x3-relu-maxpool blocks (w, 2w, 4w channels), flatten, dropout, linear.
/// half_resnet18: conv3x3 stem with batch norm, one basic residual block per stage (ResNet18 has
/// two) at w, 2w, 4w, 8w channels with strides 1, 2, 2, 2, global average pool, dropout, linear.
class Backbone {
 public:
  /// Fresh weights drawn from `seed`; the dropout stream is seeded from it as well.
  Backbone(const BackboneConfig& config, std::uint64_t seed);
  Backbone(const Backbone& other);
  Backbone& operator=(const Backbone& other);
  Backbone(Backbone&&) noexcept = default;
  Backbone& operator=(Backbone&&) noexcept = default;

  /// batch: n x 1 x input_rows x input_cols (any n, including 0).
  Tensor forward(const Tensor& batch, Mode mode);
  /// Gradient of a scalar w.r.t. the logits of the last forward(); accumulates into grads.
  void backward(const Tensor& grad_logits);

  std::vector<ParamRef> parameters();
  std::vector<BufferRef> buffers();
  void zero_grad();
  std::size_t parameter_count();

  /// Layer descriptions including parameter shapes; equal for equal configs.
  std::vector<std::string> fingerprint() const;
  int residual_block_count() const;

  void reseed_dropout(std::uint64_t seed);
  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng dropout_rng_;
};

/// Same architecture, independently initialized weights.
Backbone clone_with_new_init(const BackboneConfig& config, std::uint64_t seed);

}  // namespace evicore::nn
