// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/stgraph.hpp"

#include <string>

#include "stdiff/errors.hpp"

namespace stdiff {

namespace {

void append_block(std::vector<Triplet>& out, const SparseMatrix& block, std::size_t row0,
                  std::size_t col0) {
  for (const auto& t : block.triplets()) out.push_back({row0 + t.row, col0 + t.col, t.value});
}

SparseMatrix spatial_block(const SensorGraph& graph, bool self_loops) {
  return self_loops ? add_self_loops(graph.adjacency()) : graph.adjacency();
}

}  // namespace

SparseMatrix assemble_hstg_adjacency(const SparseMatrix& spatial, std::size_t m,
                                     const SparseMatrix& coupling, TemporalDirection direction) {
  const std::size_t n = spatial.rows();
  if (!spatial.is_square()) throw ShapeError("spatial block must be square");
  if (coupling.rows() != n || coupling.cols() != n) {
    throw ShapeError("coupling must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  const SparseMatrix c = direction == TemporalDirection::kAsWritten ? coupling : coupling.transpose();
  std::vector<Triplet> t;
  for (std::size_t b = 0; b < m; ++b) {
    append_block(t, spatial, b * n, b * n);
    if (b + 1 < m) {
      if (direction == TemporalDirection::kAsWritten) {
        append_block(t, c, b * n, (b + 1) * n);
      } else {
        append_block(t, c, (b + 1) * n, b * n);
      }
    }
  }
  return SparseMatrix::from_triplets(m * n, m * n, std::move(t));
}

SparseMatrix assemble_nhstg_adjacency(const SparseMatrix& spatial, std::size_t m) {
  const std::size_t n = spatial.rows();
  if (!spatial.is_square()) throw ShapeError("spatial block must be square");
  std::vector<Triplet> t;
  for (std::size_t b = 0; b < m; ++b) append_block(t, spatial, b * n, b * n);
  return SparseMatrix::from_triplets(m * n, m * n, std::move(t));
}

SparseMatrix hop_power(const SparseMatrix& p, std::size_t k) {
  if (k < 1) throw ArgumentError("hop index must be >= 1");
  if (!p.is_square()) throw ShapeError("hop_power needs a square matrix");
  SparseMatrix out = p;
  for (std::size_t i = 1; i < k; ++i) out = out.multiply(p);
  return out;
}

StBlockGraph build_hstg(const SensorGraph& graph, std::size_t m, const StGraphOptions& options) {
  if (m < 2) throw ArgumentError("HSTG needs m >= 2 snapshots, got " + std::to_string(m));
  if (graph.n() == 0) throw ArgumentError("empty graph");
  if (options.hops < 1) throw ArgumentError("hops must be >= 1");
  const std::size_t n = graph.n();
  const SparseMatrix coupling = options.coupling ? *options.coupling : SparseMatrix::identity(n);
  for (double v : coupling.values()) {
    if (v < 0.0) throw DomainError("coupling weights must be nonnegative");
  }

  const SparseMatrix spatial = spatial_block(graph, options.self_loops);
  StBlockGraph g;
  g.m_ = m;
  g.n_ = n;
  g.adj_h_ = assemble_hstg_adjacency(spatial, m, coupling, options.direction);
  g.adj_nh_ = assemble_nhstg_adjacency(spatial, m);
  const SparseMatrix ph = transition_matrix(g.adj_h_);
  const SparseMatrix pnh = transition_matrix(g.adj_nh_);
  g.powers_h_.push_back(ph);
  g.powers_nh_.push_back(pnh);
  for (std::size_t k = 2; k <= options.hops; ++k) {
    g.powers_h_.push_back(g.powers_h_.back().multiply(ph));
    g.powers_nh_.push_back(g.powers_nh_.back().multiply(pnh));
  }
  return g;
}

SparseMatrix build_nhstg(const SensorGraph& graph, std::size_t m, bool self_loops) {
  if (m < 1) throw ArgumentError("NHSTG needs m >= 1 snapshots");
  if (graph.n() == 0) throw ArgumentError("empty graph");
  return transition_matrix(assemble_nhstg_adjacency(spatial_block(graph, self_loops), m));
}

DenseTensor stack_features(std::span<const DenseTensor> snapshots) {
  if (snapshots.empty()) throw ShapeError("stack_features: no snapshots");
  const auto& first = snapshots.front();
  if (first.rank() != 2) throw ShapeError("stack_features: snapshots must be n x d");
  const std::size_t n = first.dim(0);
  const std::size_t d = first.dim(1);
  DenseTensor out({snapshots.size(), n, d});
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    const auto& s = snapshots[t];
    if (s.shape() != first.shape()) {
      throw ShapeError("stack_features: snapshot " + std::to_string(t) + " has shape " +
                       shape_to_string(s.shape()) + ", expected " + shape_to_string(first.shape()));
    }
    std::copy(s.values().begin(), s.values().end(), out.values().begin() + t * n * d);
  }
  return out;
}

}  // namespace stdiff
