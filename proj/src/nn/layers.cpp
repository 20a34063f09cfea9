#include "evicore/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace evicore::nn {
namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void he_normal(Tensor& t, int fan_in, Rng& rng) {
  std::normal_distribution<Scalar> normal(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : t.values()) v = normal(rng);
}

std::string dims(const Tensor& t) { return t.shape_string(); }

}  // namespace

// ---------------------------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      has_bias_(bias),
      weight_(out_channels, in_channels, kernel, kernel),
      bias_(bias ? out_channels : 0, 1, 1, 1),
      grad_weight_(out_channels, in_channels, kernel, kernel),
      grad_bias_(bias ? out_channels : 0, 1, 1, 1) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
    throw std::invalid_argument("Conv2d: bad geometry");
}

void Conv2d::init(Rng& rng) {
  he_normal(weight_, in_ * k_ * k_, rng);
  bias_.fill(0);
}

void Conv2d::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "weight", &weight_, &grad_weight_});
  if (has_bias_) out.push_back({prefix + "bias", &bias_, &grad_bias_});
}

std::string Conv2d::describe() const {
  return "conv" + std::to_string(k_) + "x" + std::to_string(k_) + "/s" + std::to_string(stride_) + " " +
         dims(weight_) + (has_bias_ ? "+bias" : "");
}

Tensor Conv2d::forward(const Tensor& x, RunContext&) {
  if (x.c() != in_) throw std::invalid_argument("Conv2d: expected " + std::to_string(in_) + " channels, got " + x.shape_string());
  in_shape_ = x.shape();
  const int n = x.n(), h = x.h(), w = x.w();
  out_h_ = (h + 2 * pad_ - k_) / stride_ + 1;
  out_w_ = (w + 2 * pad_ - k_) / stride_ + 1;
  if (out_h_ <= 0 || out_w_ <= 0) throw std::invalid_argument("Conv2d: input smaller than kernel");
  const int hw = out_h_ * out_w_;
  const int krows = in_ * k_ * k_;
  const long ncols = static_cast<long>(n) * hw;

  cols_.assign(static_cast<std::size_t>(krows) * ncols, 0);
  for (int ci = 0; ci < in_; ++ci)
    for (int ki = 0; ki < k_; ++ki)
      for (int kj = 0; kj < k_; ++kj) {
        Scalar* row = &cols_[static_cast<std::size_t>((ci * k_ + ki) * k_ + kj) * ncols];
        for (int b = 0; b < n; ++b) {
          const Scalar* src = x.data() + (static_cast<std::size_t>(b) * in_ + ci) * h * w;
          Scalar* dst = row + static_cast<std::size_t>(b) * hw;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ki;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kj;
              if (ix >= 0 && ix < w) dst[oy * out_w_ + ox] = src[iy * w + ix];
            }
          }
        }
      }

  RowMat y = ConstMatMap(weight_.data(), out_, krows) * ConstMatMap(cols_.data(), krows, ncols);
  Tensor out(n, out_, out_h_, out_w_);
  for (int co = 0; co < out_; ++co) {
    const Scalar b = has_bias_ ? bias_[co] : 0;
    for (int bi = 0; bi < n; ++bi) {
      const Scalar* src = y.data() + static_cast<std::size_t>(co) * ncols + static_cast<std::size_t>(bi) * hw;
      Scalar* dst = out.data() + (static_cast<std::size_t>(bi) * out_ + co) * hw;
      for (int p = 0; p < hw; ++p) dst[p] = src[p] + b;
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const int hw = out_h_ * out_w_;
  const int krows = in_ * k_ * k_;
  const long ncols = static_cast<long>(n) * hw;

  RowMat dy(out_, ncols);
  for (int co = 0; co < out_; ++co)
    for (int bi = 0; bi < n; ++bi) {
      const Scalar* src = grad_out.data() + (static_cast<std::size_t>(bi) * out_ + co) * hw;
      std::copy(src, src + hw, dy.data() + static_cast<std::size_t>(co) * ncols + static_cast<std::size_t>(bi) * hw);
    }

  ConstMatMap cols(cols_.data(), krows, ncols);
  MatMap(grad_weight_.data(), out_, krows).noalias() += dy * cols.transpose();
  if (has_bias_)
    for (int co = 0; co < out_; ++co) grad_bias_[co] += dy.row(co).sum();

  const RowMat dcols = ConstMatMap(weight_.data(), out_, krows).transpose() * dy;
  Tensor dx(n, in_, h, w);
  for (int ci = 0; ci < in_; ++ci)
    for (int ki = 0; ki < k_; ++ki)
      for (int kj = 0; kj < k_; ++kj) {
        const Scalar* row = dcols.data() + static_cast<std::size_t>((ci * k_ + ki) * k_ + kj) * ncols;
        for (int b = 0; b < n; ++b) {
          Scalar* dst = dx.data() + (static_cast<std::size_t>(b) * in_ + ci) * h * w;
          const Scalar* src = row + static_cast<std::size_t>(b) * hw;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ki;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kj;
              if (ix >= 0 && ix < w) dst[iy * w + ix] += src[oy * out_w_ + ox];
            }
          }
        }
      }
  return dx;
}

// ---------------------------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(out_features, in_features, 1, 1),
      bias_(out_features, 1, 1, 1),
      grad_weight_(out_features, in_features, 1, 1),
      grad_bias_(out_features, 1, 1, 1) {
  if (in_features <= 0 || out_features <= 0) throw std::invalid_argument("Linear: bad size");
}

void Linear::init(Rng& rng) {
  std::normal_distribution<Scalar> normal(0.0, std::sqrt(1.0 / in_));
  for (auto& v : weight_.values()) v = normal(rng);
  bias_.fill(0);
}

void Linear::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "weight", &weight_, &grad_weight_});
  out.push_back({prefix + "bias", &bias_, &grad_bias_});
}

std::string Linear::describe() const { return "linear " + dims(weight_); }

Tensor Linear::forward(const Tensor& x, RunContext&) {
  if (static_cast<int>(x.sample_size()) != in_)
    throw std::invalid_argument("Linear: expected " + std::to_string(in_) + " features, got " + x.shape_string());
  input_ = x;
  const int n = x.n();
  Tensor out(n, out_, 1, 1);
  MatMap y(out.data(), n, out_);
  y.noalias() = ConstMatMap(x.data(), n, in_) * ConstMatMap(weight_.data(), out_, in_).transpose();
  y.rowwise() += Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(bias_.data(), out_);
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int n = input_.n();
  ConstMatMap dy(grad_out.data(), n, out_);
  ConstMatMap x(input_.data(), n, in_);
  MatMap(grad_weight_.data(), out_, in_).noalias() += dy.transpose() * x;
  for (int o = 0; o < out_; ++o) grad_bias_[o] += dy.col(o).sum();
  Tensor dx(input_.n(), input_.c(), input_.h(), input_.w());
  MatMap(dx.data(), n, in_).noalias() = dy * ConstMatMap(weight_.data(), out_, in_);
  return dx;
}

// ---------------------------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, Scalar momentum, Scalar eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(channels, 1, 1, 1, 1),
      beta_(channels, 1, 1, 1, 0),
      grad_gamma_(channels, 1, 1, 1),
      grad_beta_(channels, 1, 1, 1),
      running_mean_(channels, 1, 1, 1, 0),
      running_var_(channels, 1, 1, 1, 1) {}

void BatchNorm2d::init(Rng&) {
  gamma_.fill(1);
  beta_.fill(0);
  running_mean_.fill(0);
  running_var_.fill(1);
}

void BatchNorm2d::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "gamma", &gamma_, &grad_gamma_});
  out.push_back({prefix + "beta", &beta_, &grad_beta_});
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

std::string BatchNorm2d::describe() const { return "batchnorm " + std::to_string(channels_); }

Tensor BatchNorm2d::forward(const Tensor& x, RunContext& ctx) {
  if (x.c() != channels_) throw std::invalid_argument("BatchNorm2d: channel mismatch " + x.shape_string());
  const int n = x.n(), hw = x.h() * x.w();
  const long m = static_cast<long>(n) * hw;
  used_batch_stats_ = ctx.batch_stats && m > 1;
  xhat_ = Tensor(n, channels_, x.h(), x.w());
  inv_std_.assign(channels_, 0);
  Tensor out(n, channels_, x.h(), x.w());

  for (int c = 0; c < channels_; ++c) {
    Scalar mean, var;
    if (used_batch_stats_) {
      Scalar s = 0;
      for (int b = 0; b < n; ++b) {
        const Scalar* p = x.data() + (static_cast<std::size_t>(b) * channels_ + c) * hw;
        for (int i = 0; i < hw; ++i) s += p[i];
      }
      mean = s / m;
      Scalar ss = 0;
      for (int b = 0; b < n; ++b) {
        const Scalar* p = x.data() + (static_cast<std::size_t>(b) * channels_ + c) * hw;
        for (int i = 0; i < hw; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / m;
      running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * var * m / (m - 1);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const Scalar inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * hw;
      for (int i = 0; i < hw; ++i) {
        const Scalar xh = (x.data()[off + i] - mean) * inv;
        xhat_.data()[off + i] = xh;
        out.data()[off + i] = gamma_[c] * xh + beta_[c];
      }
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const int n = xhat_.n(), hw = xhat_.h() * xhat_.w();
  const long m = static_cast<long>(n) * hw;
  Tensor dx(n, channels_, xhat_.h(), xhat_.w());
  for (int c = 0; c < channels_; ++c) {
    Scalar sum_dy = 0, sum_dy_xhat = 0;
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * hw;
      for (int i = 0; i < hw; ++i) {
        sum_dy += grad_out.data()[off + i];
        sum_dy_xhat += grad_out.data()[off + i] * xhat_.data()[off + i];
      }
    }
    grad_beta_[c] += sum_dy;
    grad_gamma_[c] += sum_dy_xhat;
    const Scalar g = gamma_[c] * inv_std_[c];
    for (int b = 0; b < n; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * hw;
      for (int i = 0; i < hw; ++i) {
        const Scalar dy = grad_out.data()[off + i];
        dx.data()[off + i] = used_batch_stats_
                                 ? g * (dy - sum_dy / m - xhat_.data()[off + i] * sum_dy_xhat / m)
                                 : g * dy;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------------------------
// Elementwise and reshaping layers

Tensor ReLU::forward(const Tensor& x, RunContext&) {
  output_ = x;
  for (auto& v : output_.values()) v = v > 0 ? v : 0;
  return output_;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (output_[i] <= 0) dx[i] = 0;
  return dx;
}

Tensor MaxPool2d::forward(const Tensor& x, RunContext&) {
  in_shape_ = x.shape();
  const int oh = x.h() / size_, ow = x.w() / size_;
  if (oh == 0 || ow == 0) throw std::invalid_argument("MaxPool2d: input smaller than window " + x.shape_string());
  Tensor out(x.n(), x.c(), oh, ow);
  argmax_.assign(out.size(), 0);
  std::size_t o = 0;
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          std::size_t best_i = 0;
          for (int dy = 0; dy < size_; ++dy)
            for (int dx = 0; dx < size_; ++dx) {
              const std::size_t i =
                  ((static_cast<std::size_t>(b) * x.c() + c) * x.h() + oy * size_ + dy) * x.w() + ox * size_ + dx;
              if (x[i] > best) {
                best = x[i];
                best_i = i;
              }
            }
          out[o] = best;
          argmax_[o] = best_i;
        }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  for (std::size_t o = 0; o < grad_out.size(); ++o) dx[argmax_[o]] += grad_out[o];
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, RunContext&) {
  in_shape_ = x.shape();
  const int hw = x.h() * x.w();
  Tensor out(x.n(), x.c(), 1, 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    Scalar s = 0;
    for (int p = 0; p < hw; ++p) s += x[i * hw + p];
    out[i] = s / hw;
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  const int hw = in_shape_[2] * in_shape_[3];
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    for (int p = 0; p < hw; ++p) dx[i * hw + p] = grad_out[i] / hw;
  return dx;
}

Tensor Flatten::forward(const Tensor& x, RunContext&) {
  in_shape_ = x.shape();
  return x.reshaped(x.n(), static_cast<int>(x.sample_size()), 1, 1);
}

Tensor Flatten::backward(const Tensor& grad_out) {
  return grad_out.reshaped(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
}

Tensor Dropout::forward(const Tensor& x, RunContext& ctx) {
  active_ = ctx.dropout && rate_ > 0;
  if (!active_) return x;
  if (!ctx.rng) throw std::logic_error("Dropout: active dropout requires an rng");
  const Scalar keep = 1.0 - rate_;
  std::bernoulli_distribution coin(keep);
  mask_.resize(x.size());
  Tensor out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = coin(*ctx.rng) ? 1.0 / keep : 0.0;
    out[i] *= mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!active_) return grad_out;
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

// ---------------------------------------------------------------------------------------------
// ResidualBlock

ResidualBlock::ResidualBlock(int in_channels, int out_channels, int stride)
    : in_(in_channels), out_(out_channels), stride_(stride) {
  main_.push_back(std::make_unique<Conv2d>(in_channels, out_channels, 3, stride, 1, false));
  main_.push_back(std::make_unique<BatchNorm2d>(out_channels));
  main_.push_back(std::make_unique<ReLU>());
  main_.push_back(std::make_unique<Conv2d>(out_channels, out_channels, 3, 1, 1, false));
  main_.push_back(std::make_unique<BatchNorm2d>(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    shortcut_.push_back(std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, false));
    shortcut_.push_back(std::make_unique<BatchNorm2d>(out_channels));
  }
}

ResidualBlock::ResidualBlock(const ResidualBlock& other)
    : Layer(other), in_(other.in_), out_(other.out_), stride_(other.stride_), output_(other.output_) {
  for (const auto& l : other.main_) main_.push_back(l->clone());
  for (const auto& l : other.shortcut_) shortcut_.push_back(l->clone());
}

void ResidualBlock::init(Rng& rng) {
  for (auto& l : main_) l->init(rng);
  for (auto& l : shortcut_) l->init(rng);
}

void ResidualBlock::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  static const char* main_names[] = {"conv1.", "bn1.", "relu.", "conv2.", "bn2."};
  for (std::size_t i = 0; i < main_.size(); ++i) main_[i]->collect_parameters(prefix + main_names[i], out);
  static const char* short_names[] = {"shortcut.conv.", "shortcut.bn."};
  for (std::size_t i = 0; i < shortcut_.size(); ++i) shortcut_[i]->collect_parameters(prefix + short_names[i], out);
}

void ResidualBlock::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  main_[1]->collect_buffers(prefix + "bn1.", out);
  main_[4]->collect_buffers(prefix + "bn2.", out);
  if (!shortcut_.empty()) shortcut_[1]->collect_buffers(prefix + "shortcut.bn.", out);
}

std::string ResidualBlock::describe() const {
  return "residual_block " + std::to_string(in_) + "->" + std::to_string(out_) + "/s" + std::to_string(stride_) +
         (shortcut_.empty() ? "" : " projected");
}

Tensor ResidualBlock::forward(const Tensor& x, RunContext& ctx) {
  Tensor h = x;
  for (auto& l : main_) h = l->forward(h, ctx);
  Tensor s = x;
  for (auto& l : shortcut_) s = l->forward(s, ctx);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max<Scalar>(0, h[i] + s[i]);
  output_ = h;
  return h;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (output_[i] <= 0) g[i] = 0;
  Tensor gm = g;
  for (auto it = main_.rbegin(); it != main_.rend(); ++it) gm = (*it)->backward(gm);
  Tensor gs = g;
  for (auto it = shortcut_.rbegin(); it != shortcut_.rend(); ++it) gs = (*it)->backward(gs);
  for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += gs[i];
  return gm;
}

}  // namespace evicore::nn
