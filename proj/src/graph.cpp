// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <utility>

#include <json.hpp>

#include "csv.hpp"
#include "stdiff/errors.hpp"

namespace stdiff {

SensorGraph::SensorGraph(std::vector<std::string> vertex_ids, SparseMatrix adjacency)
    : ids_(std::move(vertex_ids)), adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() != ids_.size() || adjacency_.cols() != ids_.size()) {
    throw ShapeError("adjacency is " + std::to_string(adjacency_.rows()) + "x" +
                     std::to_string(adjacency_.cols()) + " for " + std::to_string(ids_.size()) +
                     " vertices");
  }
  std::set<std::string> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw IdentifierError("duplicate sensor id '" + id + "'");
  }
}

std::size_t SensorGraph::index_of(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw IdentifierError("unknown sensor id '" + id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw ArgumentError("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile must lie in [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

SensorGraph build_gaussian_adjacency(std::span<const DistanceRecord> records,
                                     std::span<const std::string> ids,
                                     const GaussianKernelOptions& options) {
  if (records.empty()) throw ArgumentError("no distance records");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], i).second) throw IdentifierError("duplicate sensor id '" + ids[i] + "'");
  }
  auto lookup = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw IdentifierError("unknown sensor id '" + id + "'");
    return it->second;
  };

  std::vector<double> distances;
  distances.reserve(records.size());
  std::map<std::pair<std::size_t, std::size_t>, double> pair_distance;
  for (const auto& rec : records) {
    if (!std::isfinite(rec.distance) || rec.distance < 0.0) {
      throw DomainError("distance " + rec.from_id + "->" + rec.to_id + " must be finite and >= 0");
    }
    const auto key = std::make_pair(lookup(rec.from_id), lookup(rec.to_id));
    if (!pair_distance.emplace(key, rec.distance).second) {
      throw ArgumentError("duplicate distance record " + rec.from_id + "->" + rec.to_id);
    }
    distances.push_back(rec.distance);
  }

  const double sigma = options.sigma ? *options.sigma : population_std(distances);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("degenerate sigma: distances have zero variance");
  }

  std::vector<Triplet> weights;
  weights.reserve(pair_distance.size());
  for (const auto& [key, d] : pair_distance) {
    weights.push_back({key.first, key.second, std::exp(-(d * d) / (sigma * sigma))});
  }

  if (options.mode == ThresholdMode::kDistance) {
    std::erase_if(weights, [&](const Triplet& t) {
      return pair_distance.at({t.row, t.col}) > options.threshold;
    });
  } else {
    std::vector<double> w;
    w.reserve(weights.size());
    for (const auto& t : weights) w.push_back(t.value);
    const double cut = quantile(std::move(w), options.threshold);
    std::erase_if(weights, [&](const Triplet& t) { return t.value < cut; });
  }

  return SensorGraph(std::vector<std::string>(ids.begin(), ids.end()),
                     SparseMatrix::from_triplets(ids.size(), ids.size(), std::move(weights)));
}

SparseMatrix add_self_loops(const SparseMatrix& a) {
  if (!a.is_square()) {
    throw ShapeError("add_self_loops needs a square matrix, got " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()));
  }
  auto t = a.triplets();
  for (std::size_t i = 0; i < a.rows(); ++i) t.push_back({i, i, 1.0});
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

SparseMatrix transition_matrix(const SparseMatrix& a) {
  if (!a.is_square()) throw ShapeError("transition_matrix needs a square matrix");
  for (double v : a.values()) {
    if (v < 0.0) throw DomainError("transition_matrix: negative adjacency weight");
  }
  const auto degree = a.row_sums();
  std::vector<std::size_t> offsets(a.row_offsets().begin(), a.row_offsets().end());
  std::vector<std::size_t> cols(a.col_indices().begin(), a.col_indices().end());
  std::vector<double> vals(a.values().begin(), a.values().end());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    // Rows with positive degree only; a zero-degree row holds no entries.
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) vals[k] /= degree[r];
  }
  return SparseMatrix::from_csr(a.rows(), a.cols(), std::move(offsets), std::move(cols),
                                std::move(vals));
}

std::vector<DistanceRecord> read_distance_csv(const std::string& path) {
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  const auto header = csv::split(line);
  if (header.size() != 3 || header[0] != "from" || header[1] != "to" ||
      (header[2] != "distance" && header[2] != "cost")) {
    throw FormatError(path + ": expected header 'from,to,distance'");
  }
  std::vector<DistanceRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 3) throw FormatError(where + ": expected 3 fields");
    out.push_back({f[0], f[1], csv::parse_double(f[2], where)});
  }
  return out;
}

void write_distance_csv(const std::string& path, std::span<const DistanceRecord> records) {
  auto out = csv::open_output(path);
  out << "from,to,distance\n";
  for (const auto& r : records) {
    out << r.from_id << ',' << r.to_id << ',' << csv::format_double(r.distance) << '\n';
  }
}

std::vector<std::string> read_id_list(const std::string& path) {
  auto in = csv::open_input(path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& f : csv::split(line)) {
      if (!f.empty()) ids.push_back(std::move(f));
    }
  }
  if (ids.empty()) throw FormatError(path + ": no sensor ids");
  return ids;
}

void write_edge_list(const std::string& path, const SparseMatrix& m) {
  auto out = csv::open_output(path);
  out << "row,col,weight\n";
  for (const auto& t : m.triplets()) {
    out << t.row << ',' << t.col << ',' << csv::format_double(t.value) << '\n';
  }
}

void write_adjacency(const std::string& prefix, const SensorGraph& graph) {
  write_edge_list(prefix + ".csv", graph.adjacency());
  nlohmann::json sidecar = {{"n", graph.n()}, {"ids", graph.vertex_ids()}};
  auto out = csv::open_output(prefix + ".json");
  out << sidecar.dump() << '\n';
}

SensorGraph read_adjacency(const std::string& prefix) {
  nlohmann::json sidecar;
  {
    auto in = csv::open_input(prefix + ".json");
    try {
      in >> sidecar;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(prefix + ".json: " + e.what());
    }
  }
  if (!sidecar.contains("n") || !sidecar.contains("ids")) {
    throw FormatError(prefix + ".json: missing 'n' or 'ids'");
  }
  const auto n = sidecar["n"].get<std::size_t>();
  auto ids = sidecar["ids"].get<std::vector<std::string>>();
  if (ids.size() != n) throw FormatError(prefix + ".json: ids length differs from n");

  auto in = csv::open_input(prefix + ".csv");
  std::string line;
  if (!std::getline(in, line) || csv::split(line) != std::vector<std::string>{"row", "col", "weight"}) {
    throw FormatError(prefix + ".csv: expected header 'row,col,weight'");
  }
  std::vector<Triplet> t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    const std::string where = prefix + ".csv:" + std::to_string(lineno);
    if (f.size() != 3) throw FormatError(where + ": expected 3 fields");
    const auto r = csv::parse_int(f[0], where);
    const auto c = csv::parse_int(f[1], where);
    if (r < 0 || c < 0 || static_cast<std::size_t>(r) >= n || static_cast<std::size_t>(c) >= n) {
      throw FormatError(where + ": index outside [0, n)");
    }
    t.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c),
                 csv::parse_double(f[2], where)});
  }
  return SensorGraph(std::move(ids), SparseMatrix::from_triplets(n, n, std::move(t)));
}

}  // namespace stdiff
