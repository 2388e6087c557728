// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stdiff/errors.hpp"

namespace stdiff {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(n, n);
  m.col_indices_.resize(n);
  m.values_.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.row_offsets_[i + 1] = i + 1;
    m.col_indices_[i] = i;
  }
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("triplet (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                       ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!std::isfinite(t.value)) throw DomainError("non-finite sparse entry");
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix m(rows, cols);
  std::size_t i = 0;
  while (i < triplets.size()) {
    const std::size_t r = triplets[i].row;
    const std::size_t c = triplets[i].col;
    double v = 0.0;
    for (; i < triplets.size() && triplets[i].row == r && triplets[i].col == c; ++i) {
      v += triplets[i].value;
    }
    if (v != 0.0) {
      m.col_indices_.push_back(c);
      m.values_.push_back(v);
      ++m.row_offsets_[r + 1];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
  return m;
}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols,
                                    std::vector<std::size_t> row_offsets,
                                    std::vector<std::size_t> col_indices,
                                    std::vector<double> values) {
  if (row_offsets.size() != rows + 1 || row_offsets.front() != 0 ||
      row_offsets.back() != col_indices.size() || col_indices.size() != values.size()) {
    throw ShapeError("inconsistent CSR array lengths");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_offsets[r + 1] < row_offsets[r]) throw ShapeError("row_offsets not nondecreasing");
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      if (col_indices[k] >= cols) throw ShapeError("column index out of range");
      if (k > row_offsets[r] && col_indices[k] <= col_indices[k - 1]) {
        throw ShapeError("column indices not strictly increasing in row " + std::to_string(r));
      }
      if (!std::isfinite(values[k])) throw DomainError("non-finite sparse entry");
      if (values[k] == 0.0) throw ShapeError("explicit zero in canonical CSR");
    }
  }
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_offsets_ = std::move(row_offsets);
  m.col_indices_ = std::move(col_indices);
  m.values_ = std::move(values);
  return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseTensor& dense) {
  if (dense.rank() != 2) throw ShapeError("sparsify expects a rank-2 tensor");
  SparseMatrix m(dense.dim(0), dense.dim(1));
  for (std::size_t r = 0; r < m.rows_; ++r) {
    for (std::size_t c = 0; c < m.cols_; ++c) {
      const double v = dense.at(r, c);
      if (v != 0.0) {
        m.col_indices_.push_back(c);
        m.values_.push_back(v);
      }
    }
    m.row_offsets_[r + 1] = m.values_.size();
  }
  return m;
}

DenseTensor SparseMatrix::to_dense() const {
  DenseTensor d = DenseTensor::matrix(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      d.at(r, col_indices_[k]) = values_[k];
    }
  }
  return d;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto cols = row_cols(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_offsets_[r] + static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> sums(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (double v : row_values(r)) sums[r] += v;
  }
  return sums;
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      out.push_back({r, col_indices_[k], values_[k]});
    }
  }
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t(cols_, rows_);
  t.col_indices_.resize(nnz());
  t.values_.resize(nnz());
  for (auto c : col_indices_) ++t.row_offsets_[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) t.row_offsets_[c + 1] += t.row_offsets_[c];
  std::vector<std::size_t> next(t.row_offsets_.begin(), t.row_offsets_.end() - 1);
  // Rows visited in increasing order, so each transposed row stays sorted.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const std::size_t dst = next[col_indices_[k]]++;
      t.col_indices_[dst] = r;
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& rhs) const {
  if (cols_ != rhs.rows_) {
    throw ShapeError("sparse product " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " * " + std::to_string(rhs.rows_) + "x" + std::to_string(rhs.cols_));
  }
  SparseMatrix out(rows_, rhs.cols_);
  std::vector<double> acc(rhs.cols_, 0.0);
  std::vector<char> touched(rhs.cols_, 0);
  std::vector<std::size_t> pattern;
  for (std::size_t r = 0; r < rows_; ++r) {
    pattern.clear();
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const std::size_t mid = col_indices_[k];
      const double a = values_[k];
      for (std::size_t q = rhs.row_offsets_[mid]; q < rhs.row_offsets_[mid + 1]; ++q) {
        const std::size_t c = rhs.col_indices_[q];
        if (!touched[c]) {
          touched[c] = 1;
          pattern.push_back(c);
        }
        acc[c] += a * rhs.values_[q];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    for (auto c : pattern) {
      if (acc[c] != 0.0) {
        out.col_indices_.push_back(c);
        out.values_.push_back(acc[c]);
      }
      acc[c] = 0.0;
      touched[c] = 0;
    }
    out.row_offsets_[r + 1] = out.values_.size();
  }
  return out;
}

void spmm_blocks(const SparseMatrix& a, std::span<const double> x, std::size_t feat,
                 std::span<double> y, bool accumulate) {
  const std::size_t in_rows = a.cols();
  const std::size_t out_rows = a.rows();
  if (feat == 0 || in_rows == 0) return;
  const std::size_t blocks = x.size() / (in_rows * feat);
  if (blocks * in_rows * feat != x.size() || y.size() != blocks * out_rows * feat) {
    throw ShapeError("spmm: operand rows do not match matrix of " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()));
  }
  if (!accumulate) std::fill(y.begin(), y.end(), 0.0);
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t b = 0; b < blocks; ++b) {
    const double* xb = x.data() + b * in_rows * feat;
    double* yb = y.data() + b * out_rows * feat;
    for (std::size_t r = 0; r < out_rows; ++r) {
      double* yr = yb + r * feat;
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        const double w = vals[k];
        const double* xr = xb + cols[k] * feat;
        for (std::size_t f = 0; f < feat; ++f) yr[f] += w * xr[f];
      }
    }
  }
}

DenseTensor spmm(const SparseMatrix& a, const DenseTensor& x) {
  if (x.rank() != 2 || x.dim(0) != a.cols()) {
    throw ShapeError("spmm: matrix " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times operand " + shape_to_string(x.shape()));
  }
  DenseTensor y = DenseTensor::matrix(a.rows(), x.dim(1));
  spmm_blocks(a, x.values(), x.dim(1), y.values(), false);
  return y;
}

}  // namespace stdiff
