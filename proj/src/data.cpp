// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/data.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "stdiff/errors.hpp"

namespace stdiff {

std::int64_t SpeedSeries::interval() const {
  return timestamps.size() < 2 ? 300 : timestamps[1] - timestamps[0];
}

SpeedSeries load_speed_csv(const std::string& path) {
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  auto header = csv::split(line);
  if (header.size() < 2 || header[0] != "timestamp") {
    throw FormatError(path + ": expected header 'timestamp,<id1>,<id2>,...'");
  }
  SpeedSeries s;
  s.vertex_ids.assign(header.begin() + 1, header.end());
  const std::size_t n = s.vertex_ids.size();
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != n + 1) {
      throw FormatError(where + ": expected " + std::to_string(n + 1) + " fields, got " +
                        std::to_string(f.size()));
    }
    s.timestamps.push_back(csv::parse_int(f[0], where));
    for (std::size_t i = 1; i <= n; ++i) {
      const double v = f[i].empty() ? 0.0 : csv::parse_double(f[i], where);
      if (!std::isfinite(v)) throw FormatError(where + ": non-finite speed");
      values.push_back(v);
    }
  }
  if (s.timestamps.empty()) throw FormatError(path + ": no data rows");
  const std::int64_t step = s.interval();
  if (step <= 0) throw FormatError(path + ": timestamps must increase");
  for (std::size_t t = 1; t < s.timestamps.size(); ++t) {
    if (s.timestamps[t] - s.timestamps[t - 1] != step) {
      throw FormatError(path + ": non-uniform interval at row " + std::to_string(t + 1) + " (" +
                        std::to_string(s.timestamps[t] - s.timestamps[t - 1]) + " s, expected " +
                        std::to_string(step) + " s)");
    }
  }
  s.values = DenseTensor({s.timestamps.size(), n}, std::move(values));
  return s;
}

void write_speed_csv(const std::string& path, const SpeedSeries& series) {
  auto out = csv::open_output(path);
  out << "timestamp";
  for (const auto& id : series.vertex_ids) out << ',' << id;
  out << '\n';
  for (std::size_t t = 0; t < series.steps(); ++t) {
    out << series.timestamps[t];
    for (std::size_t i = 0; i < series.n(); ++i) out << ',' << csv::format_double(series.values.at(t, i));
    out << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

void check_vertex_order(const SpeedSeries& series, const SensorGraph& graph) {
  if (series.vertex_ids != graph.vertex_ids()) {
    throw IdentifierError("speed columns (" + std::to_string(series.n()) +
                          " ids) do not match the adjacency ids (" + std::to_string(graph.n()) +
                          ") in order");
  }
}

std::size_t window_count(std::size_t len, std::size_t T, std::size_t H, std::size_t stride) {
  if (stride == 0) throw ArgumentError("stride must be >= 1");
  if (len < T + H) {
    throw ArgumentError("series of " + std::to_string(len) + " steps is shorter than T + H = " +
                        std::to_string(T + H));
  }
  return (len - T - H) / stride + 1;
}

std::vector<std::size_t> window_starts(std::size_t len, std::size_t T, std::size_t H,
                                       std::size_t stride) {
  const std::size_t count = window_count(len, T, H, stride);
  std::vector<std::size_t> out(count);
  for (std::size_t w = 0; w < count; ++w) out[w] = w * stride;
  return out;
}

DenseTensor batch_history(const DenseTensor& values, std::span<const std::size_t> starts,
                          std::size_t T) {
  const std::size_t n = values.cols();
  DenseTensor out({starts.size(), T, n, 1});
  double* dst = out.data();
  for (std::size_t s : starts) {
    if (s + T > values.rows()) throw ArgumentError("history window runs past the series end");
    const double* src = values.data() + s * n;
    dst = std::copy(src, src + T * n, dst);
  }
  return out;
}

DenseTensor batch_target(const DenseTensor& values, std::span<const std::size_t> starts,
                         std::size_t T, std::size_t H) {
  const std::size_t n = values.cols();
  DenseTensor out({starts.size(), H, n, 1});
  double* dst = out.data();
  for (std::size_t s : starts) {
    if (s + T + H > values.rows()) throw ArgumentError("target window runs past the series end");
    const double* src = values.data() + (s + T) * n;
    dst = std::copy(src, src + H * n, dst);
  }
  return out;
}

std::vector<WindowSample> make_windows(const SpeedSeries& series, std::size_t T, std::size_t H,
                                       std::size_t stride) {
  std::vector<WindowSample> out;
  for (std::size_t s : window_starts(series.steps(), T, H, stride)) {
    const std::size_t one[] = {s};
    out.push_back({batch_history(series.values, one, T).reshaped({T, series.n(), 1}),
                   batch_target(series.values, one, T, H).reshaped({H, series.n(), 1}), s});
  }
  return out;
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("synthetic spec must be a JSON object");
  SynthSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n") s.n = v.get<std::size_t>();
      else if (key == "steps") s.steps = v.get<std::size_t>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "alpha") s.alpha = v.get<double>();
      else if (key == "period") s.period = v.get<double>();
      else if (key == "noise_std") s.noise_std = v.get<double>();
      else if (key == "base_speed") s.base_speed = v.get<double>();
      else if (key == "base_spread") s.base_spread = v.get<double>();
      else if (key == "amplitude") s.amplitude = v.get<double>();
      else if (key == "radius") s.radius = v.get<double>();
      else if (key == "start_time") s.start_time = v.get<std::int64_t>();
      else if (key == "interval") s.interval = v.get<std::int64_t>();
      else if (key == "dynamics") {
        const auto d = v.get<std::string>();
        if (d == "diffusion") s.dynamics = SynthDynamics::kDiffusion;
        else if (d == "seasonal+diffusion") s.dynamics = SynthDynamics::kSeasonalDiffusion;
        else throw FormatError("synthetic spec: unknown dynamics '" + d + "'");
      } else {
        throw FormatError("synthetic spec: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

SynthSpec read_synth_spec(const std::string& path) {
  auto in = csv::open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_spec(ss.str());
}

SyntheticData generate_synthetic(const SynthSpec& spec) {
  if (spec.n < 2) throw ArgumentError("synthetic graph needs n >= 2");
  if (spec.steps < 1) throw ArgumentError("synthetic series needs steps >= 1");
  if (!(spec.alpha >= 0.0 && spec.alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  if (!(spec.period > 0.0)) throw DomainError("period must be > 0");
  if (!(spec.noise_std >= 0.0)) throw DomainError("noise_std must be >= 0");
  if (spec.interval <= 0) throw DomainError("interval must be > 0");

  const std::size_t n = spec.n;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs(n), ys(n), base(n), phase(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = unit(rng);
    ys[i] = unit(rng);
  }
  for (std::size_t i = 0; i < n; ++i) base[i] = spec.base_speed + spec.base_spread * (2.0 * unit(rng) - 1.0);
  for (std::size_t i = 0; i < n; ++i) phase[i] = 2.0 * std::numbers::pi * unit(rng);

  SyntheticData out;
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "s" + std::to_string(i);
  auto dist = [&](std::size_t i, std::size_t j) { return std::hypot(xs[i] - xs[j], ys[i] - ys[j]); };
  // Link pairs within the radius and each sensor to its nearest neighbour, symmetrically.
  std::vector<std::vector<bool>> link(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t nearest = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && dist(i, j) < dist(i, nearest)) nearest = j;
      if (j == i || dist(i, j) <= spec.radius) link[i][j] = true;
    }
    link[i][nearest] = link[nearest][i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (link[i][j]) out.distances.push_back({ids[i], ids[j], dist(i, j)});
    }
  }
  GaussianKernelOptions kernel;
  kernel.mode = ThresholdMode::kWeightQuantile;
  kernel.threshold = 0.0;
  out.graph = build_gaussian_adjacency(out.distances, ids, kernel);
  out.transition = transition_matrix(add_self_loops(out.graph.adjacency()));

  const bool seasonal = spec.dynamics == SynthDynamics::kSeasonalDiffusion;
  auto drive = [&](long long t, std::size_t i) {
    if (!seasonal) return base[i];
    return base[i] + spec.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.period + phase[i]);
  };

  // Burn in until alpha^burn is negligible so the recorded stream is stationary.
  long long burn = 0;
  if (spec.alpha > 0.0) burn = static_cast<long long>(std::ceil(-40.0 / std::log(spec.alpha)));
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  std::vector<double> x(n), next(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = drive(-burn, i);

  out.series.vertex_ids = ids;
  out.series.values = DenseTensor({spec.steps, n});
  out.drive = DenseTensor({spec.steps, n});
  out.series.timestamps.resize(spec.steps);
  for (long long t = -burn; t < static_cast<long long>(spec.steps); ++t) {
    if (t > -burn) {
      const std::span<const double> xv(x);
      const std::span<double> nv(next);
      spmm_blocks(out.transition, xv, 1, nv, false);
      for (std::size_t i = 0; i < n; ++i) {
        const double eps = spec.noise_std > 0.0 ? noise(rng) : 0.0;
        x[i] = spec.alpha * next[i] + (1.0 - spec.alpha) * drive(t, i) + eps;
      }
    }
    if (t >= 0) {
      const auto row = static_cast<std::size_t>(t);
      for (std::size_t i = 0; i < n; ++i) {
        out.series.values.at(row, i) = x[i];
        out.drive.at(row, i) = drive(t, i);
      }
      out.series.timestamps[row] = spec.start_time + t * spec.interval;
    }
  }
  return out;
}

}  // namespace stdiff
