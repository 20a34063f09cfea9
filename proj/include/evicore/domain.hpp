#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evicore {

enum class Label : std::uint8_t { benign = 0, cancer = 1 };

constexpr int to_int(Label l) { return static_cast<int>(l); }
constexpr Label label_from_int(int v) { return v != 0 ? Label::cancer : Label::benign; }

/// Dense row-major 2-D array.
template <typename T>
class Array2 {
 public:
  Array2() = default;
  Array2(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Array2: negative shape");
  }
  Array2(int rows, int cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(rows) * cols)
      throw std::invalid_argument("Array2: data size does not match shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Array2&, const Array2&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Array2<float>;
using Mask = Array2<std::uint8_t>;

struct Patch {
  Image pixels;
  Label weak_label = Label::benign;
  std::string core_id;
};

/// A biopsy core: patches that all share the core's weak label. Immutable once built.
class BiopsyCore {
 public:
  BiopsyCore(std::string core_id, std::string patient_id, Label weak_label, double involvement,
             std::vector<Image> patch_pixels);

  const std::string& core_id() const { return core_id_; }
  const std::string& patient_id() const { return patient_id_; }
  Label weak_label() const { return weak_label_; }
  double involvement() const { return involvement_; }
  const std::vector<Patch>& patches() const { return patches_; }
  std::size_t size() const { return patches_.size(); }

 private:
  std::string core_id_;
  std::string patient_id_;
  Label weak_label_;
  double involvement_;
  std::vector<Patch> patches_;
};

// Synthetic ground truth lives outside BiopsyCore so that training code, which only ever
// sees cores, cannot read it.
struct PatchTruth {
  Label true_label = Label::benign;
  bool is_ood = false;
};

class OracleView {
 public:
  void add(const std::string& core_id, std::vector<PatchTruth> truth);
  bool contains(const std::string& core_id) const { return truth_.count(core_id) != 0; }
  const std::vector<PatchTruth>& core(const std::string& core_id) const;
  bool empty() const { return truth_.empty(); }
  const std::map<std::string, std::vector<PatchTruth>>& all() const { return truth_; }

 private:
  std::map<std::string, std::vector<PatchTruth>> truth_;
};

struct Dataset {
  std::vector<BiopsyCore> cores;
  OracleView oracle;
};

struct EvidenceOutput {
  std::array<double, 2> evidence{};
  std::array<double, 2> belief{};
  double uncertainty = 1.0;
  Label predicted_label = Label::benign;
  double confidence = 0.0;
};

enum class CoreStatus { predicted, uncertain };

struct CorePrediction {
  std::string core_id;
  CoreStatus status = CoreStatus::uncertain;
  std::optional<double> score;
  double retained_fraction = 0.0;
  double threshold = 0.0;
};

struct CalibrationBin {
  std::size_t count = 0;
  double confidence = 0.0;  // mean confidence, 0 for empty bins
  double accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  std::size_t total = 0;
};

}  // namespace evicore
