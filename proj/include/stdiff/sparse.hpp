// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stdiff/tensor.hpp"

namespace stdiff {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Real matrix in canonical CSR form: column indices strictly increasing
/// within each row and no explicitly stored zeros.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  static SparseMatrix identity(std::size_t n);
  /// Duplicate coordinates are summed; exact zeros are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  /// Validates the arrays and rejects non-canonical input.
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols,
                               std::vector<std::size_t> row_offsets,
                               std::vector<std::size_t> col_indices,
                               std::vector<double> values);
  /// sparsify: keeps every nonzero entry of a rank-2 tensor.
  static SparseMatrix from_dense(const DenseTensor& dense);

  /// densify
  DenseTensor to_dense() const;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  bool is_square() const { return rows_ == cols_; }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::size_t> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }

  double at(std::size_t r, std::size_t c) const;
  std::vector<double> row_sums() const;
  std::vector<Triplet> triplets() const;

  SparseMatrix transpose() const;
  /// Sparse-sparse product this * rhs.
  SparseMatrix multiply(const SparseMatrix& rhs) const;

  bool operator==(const SparseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

/// Y = A * X for a rank-2 X with A.cols() rows. Accumulation runs row by row
/// over the CSR arrays in stored order.
DenseTensor spmm(const SparseMatrix& a, const DenseTensor& x);

/// Applies A to each of the `x.rows() / A.cols()` consecutive row blocks of x.
/// Used for minibatches laid out as [batch][A.cols()][features].
void spmm_blocks(const SparseMatrix& a, std::span<const double> x, std::size_t feat,
                 std::span<double> y, bool accumulate);

}  // namespace stdiff
