// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stdiff/data.hpp"
#include "stdiff/tensor.hpp"

namespace stdiff {

class IstdGcnModel;
struct NormStats;

constexpr double kDefaultMapeDelta = 1e-5;

/// One flag per element; nonzero means the element is scored.
using Mask = std::vector<std::uint8_t>;

/// Scores entries whose target is nonzero (0 marks a missing reading).
Mask nonzero_mask(const DenseTensor& target);

// Each metric throws ShapeError on mismatched shapes and DomainError when
// the mask selects nothing. The two-argument forms use nonzero_mask(target).
double mae(const DenseTensor& pred, const DenseTensor& target, const Mask& mask);
double mae(const DenseTensor& pred, const DenseTensor& target);
/// sqrt(mean(squared error)).
double rmse(const DenseTensor& pred, const DenseTensor& target, const Mask& mask);
double rmse(const DenseTensor& pred, const DenseTensor& target);
/// 100 * mean(|pred - target| / (target + delta)).
double mape(const DenseTensor& pred, const DenseTensor& target, const Mask& mask,
            double delta = kDefaultMapeDelta);
double mape(const DenseTensor& pred, const DenseTensor& target);

struct HorizonMetrics {
  std::size_t horizon = 0;  // snapshots ahead; 0 for the all-horizon aggregate
  double mae = 0.0;
  double rmse = 0.0;
  double mape_pct = 0.0;
  std::size_t n_samples = 0;
};

struct EvalReport {
  std::vector<HorizonMetrics> rows;  // requested horizons in order, then the aggregate
  std::int64_t interval_seconds = 300;
};

const std::vector<std::size_t>& default_report_horizons();  // {3, 6, 12}

/// Metrics of pred vs target, both [B, H, n, d_out], in data units. Horizons
/// beyond H are skipped; n_samples counts windows.
EvalReport evaluate_predictions(const DenseTensor& pred, const DenseTensor& target,
                                std::span<const std::size_t> horizons,
                                std::int64_t interval_seconds = 300,
                                double delta = kDefaultMapeDelta);

/// Runs the model over the windows starting at `starts` of a normalised
/// [time, n] matrix, maps predictions back with the stats, and scores them
/// against the raw matrix.
EvalReport evaluate(const IstdGcnModel& model, const DenseTensor& normalized,
                    const DenseTensor& raw, std::span<const std::size_t> starts,
                    const NormStats& stats, std::span<const std::size_t> horizons,
                    std::int64_t interval_seconds = 300, std::size_t batch_size = 64);

/// Denormalised predictions [B, H, n, d_out] for the given windows.
DenseTensor predict_windows(const IstdGcnModel& model, const DenseTensor& normalized,
                            std::span<const std::size_t> starts, const NormStats& stats,
                            std::size_t batch_size = 64);

/// `horizon_min,mae,rmse,mape_pct,n_samples`; the aggregate row reads `all`.
void write_report_csv(const std::string& path, const EvalReport& report);
std::string report_csv(const EvalReport& report);
/// Parses and schema-checks a report CSV. Throws FormatError.
EvalReport read_report_csv(const std::string& path);

enum class HaMode { kWeekly, kGlobal };

/// Per-vertex averages of nonzero training speeds, either per time-of-week
/// slot or over the whole training range.
struct HistoricalAverage {
  HaMode mode = HaMode::kGlobal;
  std::int64_t interval_seconds = 300;
  std::size_t slots = 1;
  DenseTensor table;   // [slots, n]
  DenseTensor global;  // [n]

  double predict(std::int64_t timestamp, std::size_t vertex) const;
};

/// Fits on rows [0, train_end) of the series. Weekly mode needs a full week
/// of history; otherwise it falls back to global mode and fills `warning`.
HistoricalAverage fit_historical_average(const SpeedSeries& series, std::size_t train_end,
                                         HaMode mode, std::string* warning = nullptr);

/// HA predictions [B, H, n, 1] for the windows; each entry is the average for
/// its own target time.
DenseTensor historical_average_baseline(const HistoricalAverage& ha, const SpeedSeries& series,
                                        std::span<const std::size_t> starts, std::size_t T,
                                        std::size_t H);

/// HA report: one score over the distinct target cells of the windows,
/// repeated for every horizon row.
EvalReport evaluate_historical_average(const HistoricalAverage& ha, const SpeedSeries& series,
                                       std::span<const std::size_t> starts, std::size_t T,
                                       std::size_t H, std::span<const std::size_t> horizons,
                                       double delta = kDefaultMapeDelta);

}  // namespace stdiff
