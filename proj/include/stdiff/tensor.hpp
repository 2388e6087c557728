// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stdiff {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with an arbitrary-rank shape.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape, double fill = 0.0);
  DenseTensor(Shape shape, std::vector<double> values);

  static DenseTensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return DenseTensor({rows, cols}, fill);
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Rank-2 view helpers; a tensor of rank > 2 is treated as
  // (product of leading dims) x (last dim).
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  DenseTensor reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const;

  bool operator==(const DenseTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

/// A trainable array together with its gradient accumulator.
struct ParamArray {
  std::string name;
  DenseTensor value;
  DenseTensor grad;

  ParamArray() = default;
  ParamArray(std::string n, DenseTensor v);

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace stdiff
