// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "stdiff/graph.hpp"
#include "stdiff/sparse.hpp"
#include "stdiff/tensor.hpp"

namespace stdiff {

// Vertex i of snapshot t sits at flat index t * n + i in every block matrix
// and every stacked feature tensor produced here.

enum class TemporalDirection {
  kAsWritten,   // coupling C in block (t, t+1)
  kTransposed,  // coupling C^T in block (t+1, t)
};

struct StGraphOptions {
  bool self_loops = true;
  TemporalDirection direction = TemporalDirection::kAsWritten;
  // Temporal coupling; identity when unset. Must be n x n and nonnegative.
  std::optional<SparseMatrix> coupling;
  // Number of precomputed hop powers (receptive field K).
  std::size_t hops = 1;
};

/// Upper block-bidiagonal [[S, C, 0..], [0, S, C, ..], .., [.., 0, S]] of size mn x mn.
SparseMatrix assemble_hstg_adjacency(const SparseMatrix& spatial, std::size_t m,
                                     const SparseMatrix& coupling,
                                     TemporalDirection direction = TemporalDirection::kAsWritten);
/// blockdiag(S, .., S) of size mn x mn.
SparseMatrix assemble_nhstg_adjacency(const SparseMatrix& spatial, std::size_t m);

/// Exact P^k for k >= 1.
SparseMatrix hop_power(const SparseMatrix& p, std::size_t k);

/// HSTG and NHSTG transitions over m snapshots, with cached hop powers.
/// Immutable once built.
class StBlockGraph {
 public:
  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  std::size_t hops() const { return powers_h_.size(); }

  const SparseMatrix& hstg_adjacency() const { return adj_h_; }
  const SparseMatrix& nhstg_adjacency() const { return adj_nh_; }
  const SparseMatrix& hstg_transition() const { return powers_h_.front(); }
  const SparseMatrix& nhstg_transition() const { return powers_nh_.front(); }
  /// P_H^k and P_NH^k for 1 <= k <= hops().
  const SparseMatrix& hstg_power(std::size_t k) const { return powers_h_.at(k - 1); }
  const SparseMatrix& nhstg_power(std::size_t k) const { return powers_nh_.at(k - 1); }

 private:
  friend StBlockGraph build_hstg(const SensorGraph&, std::size_t, const StGraphOptions&);

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  SparseMatrix adj_h_;
  SparseMatrix adj_nh_;
  std::vector<SparseMatrix> powers_h_;
  std::vector<SparseMatrix> powers_nh_;
};

StBlockGraph build_hstg(const SensorGraph& graph, std::size_t m, const StGraphOptions& options = {});

/// Block-diagonal NHSTG transition for m >= 1 snapshots.
SparseMatrix build_nhstg(const SensorGraph& graph, std::size_t m, bool self_loops = true);

/// Stacks m snapshot matrices (n x d each) into an m x n x d tensor;
/// `.reshaped({m * n, d})` gives the flat row view.
DenseTensor stack_features(std::span<const DenseTensor> snapshots);

}  // namespace stdiff
