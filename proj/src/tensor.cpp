// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stdiff/errors.hpp"

namespace stdiff {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

DenseTensor::DenseTensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("tensor of shape " + shape_to_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

std::size_t DenseTensor::rows() const {
  if (shape_.empty()) return 1;
  return shape_.size() == 1 ? 1 : values_.size() / shape_.back();
}

std::size_t DenseTensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

DenseTensor DenseTensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  }
  return DenseTensor(std::move(shape), values_);
}

void DenseTensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool DenseTensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ParamArray::ParamArray(std::string n, DenseTensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

}  // namespace stdiff
