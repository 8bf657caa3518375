#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedloss {

/// Bad user-supplied value (out-of-range hyperparameter, non-binary label, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Internal misuse: mismatched shapes, stale caches.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Inconsistent configuration (missing class frequencies, unknown sweep axis, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix. Rows are frames, columns are classes or feature dims.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ContractViolation("grid data size does not match rows*cols");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool same_shape(std::size_t rows, std::size_t cols) const noexcept {
    return rows_ == rows && cols_ == cols;
  }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  friend bool operator==(const Grid& a, const Grid& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Grid<double>;

/// Per-frame, per-class detection scores in [0,1]. Losses clamp further into
/// [eps, 1-eps] before taking logs or powers.
class PredictionGrid {
 public:
  PredictionGrid() = default;
  explicit PredictionGrid(Matrix values);

  std::size_t frames() const noexcept { return values_.rows(); }
  std::size_t classes() const noexcept { return values_.cols(); }
  double operator()(std::size_t n, std::size_t m) const noexcept { return values_(n, m); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

/// Per-frame, per-class binary targets.
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(std::size_t frames, std::size_t classes) : values_(frames, classes, 0) {}
  explicit LabelGrid(Grid<std::uint8_t> values);
  /// Throws ValidationError unless every entry is exactly 0 or 1.
  static LabelGrid from_values(const Matrix& values);

  std::size_t frames() const noexcept { return values_.rows(); }
  std::size_t classes() const noexcept { return values_.cols(); }
  bool active(std::size_t n, std::size_t m) const noexcept { return values_(n, m) != 0; }
  void set(std::size_t n, std::size_t m, bool on) noexcept { values_(n, m) = on ? 1 : 0; }
  const Grid<std::uint8_t>& values() const noexcept { return values_; }

  friend bool operator==(const LabelGrid& a, const LabelGrid& b) = default;

 private:
  Grid<std::uint8_t> values_;
};

/// Acoustic features, N frames x D dims.
using FeatureGrid = Matrix;

std::string shape_string(std::size_t rows, std::size_t cols);

}  // namespace sedloss
