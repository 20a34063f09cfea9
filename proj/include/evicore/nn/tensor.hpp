#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace evicore::nn {

using Scalar = double;

/// NCHW tensor; vectors and matrices use trailing unit dimensions.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, Scalar fill = 0);

  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  const std::array<int, 4>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(shape_[1]) * shape_[2] * shape_[3]; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& values() { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }
  Scalar& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  Scalar at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  void fill(Scalar v);
  Tensor reshaped(int n, int c, int h, int w) const;
  std::string shape_string() const;

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  std::array<int, 4> shape_{0, 0, 0, 0};
  std::vector<Scalar> data_;
};

}  // namespace evicore::nn
