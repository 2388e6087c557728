// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stdiff/sparse.hpp"

namespace stdiff {

struct DistanceRecord {
  std::string from_id;
  std::string to_id;
  double distance = 0.0;
};

/// Static road network: sensor ids and the weighted n x n adjacency.
class SensorGraph {
 public:
  SensorGraph() = default;
  SensorGraph(std::vector<std::string> vertex_ids, SparseMatrix adjacency);

  std::size_t n() const { return ids_.size(); }
  const std::vector<std::string>& vertex_ids() const { return ids_; }
  const SparseMatrix& adjacency() const { return adjacency_; }

  /// Throws IdentifierError for an unknown id.
  std::size_t index_of(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  SparseMatrix adjacency_;
};

enum class ThresholdMode {
  kDistance,        // keep W_ij only where d_ij <= threshold
  kWeightQuantile,  // zero weights strictly below the given quantile of all weights
};

struct GaussianKernelOptions {
  ThresholdMode mode = ThresholdMode::kWeightQuantile;
  double threshold = 0.1;
  // Overrides the population standard deviation of the distances.
  std::optional<double> sigma;
};

double population_std(std::span<const double> xs);

/// Linear-interpolation quantile (numpy's default) of an unsorted sample.
double quantile(std::vector<double> xs, double q);

/// W_ij = exp(-d_ij^2 / sigma^2) over the listed pairs, then thresholded.
/// Pairs without a record get weight 0.
SensorGraph build_gaussian_adjacency(std::span<const DistanceRecord> records,
                                     std::span<const std::string> ids,
                                     const GaussianKernelOptions& options = {});

/// A + I.
SparseMatrix add_self_loops(const SparseMatrix& a);

/// D^-1 A with D_ii = sum_j A_ij. Zero-degree rows stay zero.
SparseMatrix transition_matrix(const SparseMatrix& a);

// File formats.
std::vector<DistanceRecord> read_distance_csv(const std::string& path);
void write_distance_csv(const std::string& path, std::span<const DistanceRecord> records);
/// One id per line; blank lines ignored. A single comma-separated line also works.
std::vector<std::string> read_id_list(const std::string& path);

/// Edge list `<prefix>.csv` (row,col,weight) plus sidecar `<prefix>.json`.
void write_adjacency(const std::string& prefix, const SensorGraph& graph);
SensorGraph read_adjacency(const std::string& prefix);
/// Edge list export of an arbitrary matrix (no sidecar).
void write_edge_list(const std::string& path, const SparseMatrix& m);

}  // namespace stdiff
