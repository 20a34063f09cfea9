#include "evicore/nn/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace evicore::nn {

Tensor::Tensor(int n, int c, int h, int w, Scalar fill)
    : shape_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {
  if (n < 0 || c < 0 || h < 0 || w < 0) throw std::invalid_argument("Tensor: negative dimension");
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(int n, int c, int h, int w) const {
  if (static_cast<std::size_t>(n) * c * h * w != data_.size())
    throw std::invalid_argument("Tensor::reshaped: element count mismatch");
  Tensor t;
  t.shape_ = {n, c, h, w};
  t.data_ = data_;
  return t;
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(shape_[0]) + "," + std::to_string(shape_[1]) + "," + std::to_string(shape_[2]) + "," +
         std::to_string(shape_[3]) + "]";
}

}  // namespace evicore::nn
