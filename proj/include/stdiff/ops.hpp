// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable operations used by the forecasting model. Every op reads its
// operands from a Tape, appends one record, and carries a hand-written
// backward. Tensors of rank > 2 are treated as (leading dims) x (last dim)
// wherever an op works row-wise.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stdiff/sparse.hpp"
#include "stdiff/tape.hpp"

namespace stdiff::ops {

/// Y = X * W for X [.., d_in] and W [d_in, d_out].
Var linear(Tape& tape, Var x, Var w);

/// Elementwise a + b (identical shapes).
Var add(Tape& tape, Var a, Var b);

/// X + b broadcast over rows, b of length cols(X).
Var add_bias(Tape& tape, Var x, Var b);

/// max(0, x); subgradient 0 at 0.
Var relu(Tape& tape, Var x);

/// Y = P * X applied to each consecutive block of P.cols() rows of X. The
/// matrix carries no gradient and must outlive the tape.
Var spmm(Tape& tape, const SparseMatrix& p, Var x);

/// Row-wise (x - mean) / sqrt(var + eps) * scale + shift, population variance.
Var layer_norm(Tape& tape, Var x, Var scale, Var shift, double eps);

/// X laid out as [batch][m][n][d] (any leading batch, possibly none) and a
/// kernel [m][d]: Y[b][i][f] = sum_t X[b][t][i][f] * kernel[t][f].
Var temporal_compress(Tape& tape, Var x, Var kernel, std::size_t n);

/// Column-wise concatenation of equally shaped [.., d] parts.
Var concat_features(Tape& tape, std::span<const Var> parts);

/// Row-wise concatenation of rank-2 parts sharing a column count.
Var concat_rows(Tape& tape, std::span<const Var> parts);

/// Output row r is row index[r] of x (rank-2 view). Rows may repeat.
Var gather_rows(Tape& tape, Var x, std::vector<std::size_t> index, Shape out_shape);

/// Contiguous row slice [begin, begin + count) of a rank-2 x.
Var slice_rows(Tape& tape, Var x, std::size_t begin, std::size_t count);

/// Output element e is element index[e] of x.
Var gather_elements(Tape& tape, Var x, std::vector<std::size_t> index, Shape out_shape);

struct MlpDecoderVars {
  Var w1;  // [d, hidden]
  Var b1;  // [hidden]
  Var w2;  // [hidden, horizons * d_out]
  Var b2;  // [horizons * d_out]
};

/// Per-vertex two-layer MLP emitting every horizon in one pass. Input
/// [batch.., n, d]; output [batch.., horizons, n, d_out].
Var mlp_decode(Tape& tape, Var x, const MlpDecoderVars& w, std::size_t horizons,
               std::size_t d_out);

/// mean |pred - target| + lambda * ||params||_2 (or its square when `squared`).
/// Returns a one-element tensor.
Var mae_l2_loss(Tape& tape, Var pred, const DenseTensor& target, std::span<const Var> params,
                double lambda, bool squared = false);

namespace testing {
/// Corrupts the layer_norm scale gradient; used only to prove that gradient
/// checks catch a broken backward.
void inject_backward_fault(bool on);
}  // namespace testing

}  // namespace stdiff::ops
