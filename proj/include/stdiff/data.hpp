// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stdiff/graph.hpp"
#include "stdiff/tensor.hpp"

namespace stdiff {

/// Speeds on a fixed time grid. A value of 0 marks a missing reading.
struct SpeedSeries {
  std::vector<std::int64_t> timestamps;  // epoch seconds, constant interval
  std::vector<std::string> vertex_ids;
  DenseTensor values;                    // [time, n]

  std::size_t steps() const { return timestamps.size(); }
  std::size_t n() const { return vertex_ids.size(); }
  /// Sampling interval in seconds (300 for a single-row series).
  std::int64_t interval() const;
};

/// Reads `timestamp,<id1>,<id2>,...`. Throws FormatError on a malformed file
/// or a non-uniform interval.
SpeedSeries load_speed_csv(const std::string& path);
void write_speed_csv(const std::string& path, const SpeedSeries& series);

/// Throws IdentifierError unless the series columns match the graph ids in order.
void check_vertex_order(const SpeedSeries& series, const SensorGraph& graph);

struct WindowSample {
  DenseTensor history;  // [T, n, 1]
  DenseTensor target;   // [H, n, 1]
  std::size_t start_index = 0;
};

/// floor((len - T - H) / stride) + 1 for len >= T + H.
std::size_t window_count(std::size_t len, std::size_t T, std::size_t H, std::size_t stride = 1);
std::vector<std::size_t> window_starts(std::size_t len, std::size_t T, std::size_t H,
                                       std::size_t stride = 1);
std::vector<WindowSample> make_windows(const SpeedSeries& series, std::size_t T, std::size_t H,
                                       std::size_t stride = 1);

/// Histories [B, T, n, 1] taken from rows [s, s + T) of a [time, n] matrix.
DenseTensor batch_history(const DenseTensor& values, std::span<const std::size_t> starts,
                          std::size_t T);
/// Targets [B, H, n, 1] taken from rows [s + T, s + T + H).
DenseTensor batch_target(const DenseTensor& values, std::span<const std::size_t> starts,
                         std::size_t T, std::size_t H);

enum class SynthDynamics { kDiffusion, kSeasonalDiffusion };

struct SynthSpec {
  std::size_t n = 10;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  double alpha = 0.8;        // weight of the diffused previous state
  double period = 288.0;     // seasonal period in steps (one day at 5 min)
  double noise_std = 1.0;
  SynthDynamics dynamics = SynthDynamics::kSeasonalDiffusion;
  double base_speed = 55.0;  // mean level
  double base_spread = 8.0;  // per-vertex level spread
  double amplitude = 10.0;   // seasonal amplitude
  double radius = 0.45;      // unit-square distance below which sensors are linked
  std::int64_t start_time = 1335830400;  // 2012-05-01 00:00:00 UTC
  std::int64_t interval = 300;
};

/// Fields of `{n, steps, seed, alpha, period, noise_std}` plus optional extras.
SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec read_synth_spec(const std::string& path);

struct SyntheticData {
  std::vector<DistanceRecord> distances;
  SensorGraph graph;
  SparseMatrix transition;  // row-normalised self-looped adjacency driving the dynamics
  SpeedSeries series;
  DenseTensor drive;        // [steps, n] noise-free seasonal (or constant) term
};

/// Random geometric graph in the unit square with Gaussian-kernel weights and
/// x_{t+1} = alpha * P x_t + (1 - alpha) * seasonal(t + 1) + noise.
SyntheticData generate_synthetic(const SynthSpec& spec);

}  // namespace stdiff
