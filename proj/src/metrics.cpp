// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/model.hpp"
#include "stdiff/training.hpp"

namespace stdiff {

namespace {

constexpr std::int64_t kWeekSeconds = 7 * 24 * 3600;

void check_operands(const DenseTensor& pred, const DenseTensor& target, const Mask& mask,
                    const char* what) {
  if (pred.shape() != target.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + shape_to_string(pred.shape()) +
                     " vs target " + shape_to_string(target.shape()));
  }
  if (mask.size() != target.size()) throw ShapeError(std::string(what) + ": mask size mismatch");
}

template <typename Term>
double masked_mean(const DenseTensor& pred, const DenseTensor& target, const Mask& mask,
                   const char* what, Term term) {
  check_operands(pred, target, mask, what);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < target.size(); ++e) {
    if (!mask[e]) continue;
    sum += term(pred[e], target[e]);
    ++count;
  }
  if (count == 0) throw DomainError(std::string(what) + " is undefined: the mask selects no entries");
  return sum / static_cast<double>(count);
}

struct Accum {
  double abs = 0.0;
  double sq = 0.0;
  double pct = 0.0;
  std::size_t count = 0;

  void add(double p, double t, double delta) {
    const double diff = p - t;
    abs += std::abs(diff);
    sq += diff * diff;
    pct += std::abs(diff) / (t + delta);
    ++count;
  }

  HorizonMetrics finish(std::size_t horizon, std::size_t samples) const {
    if (count == 0) throw DomainError("metrics are undefined: no scored entries");
    const double c = static_cast<double>(count);
    return {horizon, abs / c, std::sqrt(sq / c), 100.0 * pct / c, samples};
  }
};

std::vector<std::size_t> usable_horizons(std::span<const std::size_t> horizons, std::size_t H) {
  std::vector<std::size_t> out;
  for (std::size_t h : horizons) {
    if (h >= 1 && h <= H) out.push_back(h);
  }
  return out;
}

}  // namespace

Mask nonzero_mask(const DenseTensor& target) {
  Mask m(target.size());
  for (std::size_t e = 0; e < target.size(); ++e) m[e] = target[e] != 0.0;
  return m;
}

double mae(const DenseTensor& pred, const DenseTensor& target, const Mask& mask) {
  return masked_mean(pred, target, mask, "MAE", [](double p, double t) { return std::abs(p - t); });
}

double mae(const DenseTensor& pred, const DenseTensor& target) {
  return mae(pred, target, nonzero_mask(target));
}

double rmse(const DenseTensor& pred, const DenseTensor& target, const Mask& mask) {
  return std::sqrt(masked_mean(pred, target, mask, "RMSE",
                               [](double p, double t) { return (p - t) * (p - t); }));
}

double rmse(const DenseTensor& pred, const DenseTensor& target) {
  return rmse(pred, target, nonzero_mask(target));
}

double mape(const DenseTensor& pred, const DenseTensor& target, const Mask& mask, double delta) {
  if (!(delta > 0.0)) throw DomainError("MAPE delta must be > 0");
  return 100.0 * masked_mean(pred, target, mask, "MAPE", [delta](double p, double t) {
           return std::abs(p - t) / (t + delta);
         });
}

double mape(const DenseTensor& pred, const DenseTensor& target) {
  return mape(pred, target, nonzero_mask(target));
}

const std::vector<std::size_t>& default_report_horizons() {
  static const std::vector<std::size_t> h{3, 6, 12};
  return h;
}

EvalReport evaluate_predictions(const DenseTensor& pred, const DenseTensor& target,
                                std::span<const std::size_t> horizons,
                                std::int64_t interval_seconds, double delta) {
  if (pred.shape() != target.shape() || pred.rank() != 4) {
    throw ShapeError("evaluate: prediction " + shape_to_string(pred.shape()) + " and target " +
                     shape_to_string(target.shape()) + " must both be [B, H, n, d_out]");
  }
  if (!(delta > 0.0)) throw DomainError("MAPE delta must be > 0");
  const std::size_t B = pred.dim(0), H = pred.dim(1);
  const std::size_t cell = pred.dim(2) * pred.dim(3);
  if (B == 0) throw DomainError("evaluate: no windows to score");

  EvalReport report;
  report.interval_seconds = interval_seconds;
  Accum all;
  std::vector<Accum> per_h(H);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t base = (b * H + h) * cell;
      for (std::size_t e = 0; e < cell; ++e) {
        const double t = target[base + e];
        if (t == 0.0) continue;
        per_h[h].add(pred[base + e], t, delta);
        all.add(pred[base + e], t, delta);
      }
    }
  }
  for (std::size_t h : usable_horizons(horizons, H)) report.rows.push_back(per_h[h - 1].finish(h, B));
  report.rows.push_back(all.finish(0, B));
  return report;
}

DenseTensor predict_windows(const IstdGcnModel& model, const DenseTensor& normalized,
                            std::span<const std::size_t> starts, const NormStats& stats,
                            std::size_t batch_size) {
  const ModelConfig& c = model.config();
  if (batch_size == 0) throw ArgumentError("batch size must be >= 1");
  DenseTensor out({starts.size(), c.H, model.n(), c.d_out});
  double* dst = out.data();
  for (std::size_t b0 = 0; b0 < starts.size(); b0 += batch_size) {
    const auto chunk = starts.subspan(b0, std::min(batch_size, starts.size() - b0));
    const DenseTensor pred = inverse_zscore(model.predict(batch_history(normalized, chunk, c.T)), stats);
    dst = std::copy(pred.values().begin(), pred.values().end(), dst);
  }
  return out;
}

EvalReport evaluate(const IstdGcnModel& model, const DenseTensor& normalized,
                    const DenseTensor& raw, std::span<const std::size_t> starts,
                    const NormStats& stats, std::span<const std::size_t> horizons,
                    std::int64_t interval_seconds, std::size_t batch_size) {
  if (starts.empty()) throw DomainError("evaluate: empty evaluation range");
  const DenseTensor pred = predict_windows(model, normalized, starts, stats, batch_size);
  const DenseTensor target = batch_target(raw, starts, model.config().T, model.config().H);
  return evaluate_predictions(pred, target, horizons, interval_seconds);
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "horizon_min,mae,rmse,mape_pct,n_samples\n";
  for (const auto& r : report.rows) {
    if (r.horizon == 0) {
      out << "all";
    } else {
      out << static_cast<std::int64_t>(r.horizon) * report.interval_seconds / 60;
    }
    out << ',' << csv::format_double(r.mae) << ',' << csv::format_double(r.rmse) << ','
        << csv::format_double(r.mape_pct) << ',' << r.n_samples << '\n';
  }
  return out.str();
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  auto out = csv::open_output(path);
  out << report_csv(report);
  if (!out) throw FormatError("failed writing " + path);
}

EvalReport read_report_csv(const std::string& path) {
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != "horizon_min,mae,rmse,mape_pct,n_samples") {
    throw FormatError(path + ": expected header 'horizon_min,mae,rmse,mape_pct,n_samples'");
  }
  EvalReport report;
  std::size_t lineno = 1;
  bool saw_all = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto f = csv::split(line);
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    HorizonMetrics r;
    if (f[0] == "all") {
      saw_all = true;
    } else {
      const long long minutes = csv::parse_int(f[0], where);
      if (minutes <= 0) throw FormatError(where + ": horizon must be positive");
      r.horizon = static_cast<std::size_t>(minutes * 60 / report.interval_seconds);
    }
    r.mae = csv::parse_double(f[1], where);
    r.rmse = csv::parse_double(f[2], where);
    r.mape_pct = csv::parse_double(f[3], where);
    const long long samples = csv::parse_int(f[4], where);
    if (r.mae < 0 || r.rmse < 0 || r.mape_pct < 0 || samples < 0) {
      throw FormatError(where + ": metrics must be nonnegative");
    }
    r.n_samples = static_cast<std::size_t>(samples);
    report.rows.push_back(r);
  }
  if (!saw_all) throw FormatError(path + ": missing the 'all' row");
  return report;
}

double HistoricalAverage::predict(std::int64_t timestamp, std::size_t vertex) const {
  if (mode == HaMode::kGlobal) return global[vertex];
  const std::int64_t tow = ((timestamp % kWeekSeconds) + kWeekSeconds) % kWeekSeconds;
  const auto slot = static_cast<std::size_t>(tow / interval_seconds) % slots;
  return table.at(slot, vertex);
}

HistoricalAverage fit_historical_average(const SpeedSeries& series, std::size_t train_end,
                                         HaMode mode, std::string* warning) {
  const std::size_t n = series.n();
  if (train_end == 0 || train_end > series.steps()) {
    throw ArgumentError("historical average needs 1 <= train_end <= " +
                        std::to_string(series.steps()));
  }
  HistoricalAverage ha;
  ha.interval_seconds = series.interval();
  const std::int64_t covered = static_cast<std::int64_t>(train_end) * ha.interval_seconds;
  if (mode == HaMode::kWeekly && (covered < kWeekSeconds || kWeekSeconds % ha.interval_seconds != 0)) {
    if (warning) {
      *warning = "historical average: " + std::to_string(covered) +
                 " s of training history is less than one week; using global per-vertex means";
    }
    mode = HaMode::kGlobal;
  }
  ha.mode = mode;

  std::vector<double> gsum(n, 0.0);
  std::vector<std::size_t> gcount(n, 0);
  ha.slots = mode == HaMode::kWeekly ? static_cast<std::size_t>(kWeekSeconds / ha.interval_seconds) : 1;
  std::vector<double> sum(ha.slots * n, 0.0);
  std::vector<std::size_t> count(ha.slots * n, 0);
  for (std::size_t t = 0; t < train_end; ++t) {
    std::size_t slot = 0;
    if (mode == HaMode::kWeekly) {
      const std::int64_t tow = ((series.timestamps[t] % kWeekSeconds) + kWeekSeconds) % kWeekSeconds;
      slot = static_cast<std::size_t>(tow / ha.interval_seconds);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double v = series.values.at(t, i);
      if (v == 0.0) continue;
      gsum[i] += v;
      ++gcount[i];
      sum[slot * n + i] += v;
      ++count[slot * n + i];
    }
  }
  ha.global = DenseTensor({n});
  for (std::size_t i = 0; i < n; ++i) ha.global[i] = gcount[i] ? gsum[i] / static_cast<double>(gcount[i]) : 0.0;
  ha.table = DenseTensor({ha.slots, n});
  for (std::size_t s = 0; s < ha.slots; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = count[s * n + i];
      ha.table.at(s, i) = c ? sum[s * n + i] / static_cast<double>(c) : ha.global[i];
    }
  }
  return ha;
}

DenseTensor historical_average_baseline(const HistoricalAverage& ha, const SpeedSeries& series,
                                        std::span<const std::size_t> starts, std::size_t T,
                                        std::size_t H) {
  const std::size_t n = series.n();
  DenseTensor out({starts.size(), H, n, 1});
  for (std::size_t b = 0; b < starts.size(); ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t row = starts[b] + T + h;
      if (row >= series.steps()) throw ArgumentError("HA target runs past the series end");
      for (std::size_t i = 0; i < n; ++i) {
        out[(b * H + h) * n + i] = ha.predict(series.timestamps[row], i);
      }
    }
  }
  return out;
}

EvalReport evaluate_historical_average(const HistoricalAverage& ha, const SpeedSeries& series,
                                       std::span<const std::size_t> starts, std::size_t T,
                                       std::size_t H, std::span<const std::size_t> horizons,
                                       double delta) {
  if (starts.empty()) throw DomainError("evaluate: empty evaluation range");
  if (!(delta > 0.0)) throw DomainError("MAPE delta must be > 0");
  std::set<std::size_t> rows;
  for (std::size_t s : starts) {
    for (std::size_t h = 0; h < H; ++h) rows.insert(s + T + h);
  }
  Accum acc;
  for (std::size_t row : rows) {
    if (row >= series.steps()) throw ArgumentError("HA target runs past the series end");
    for (std::size_t i = 0; i < series.n(); ++i) {
      const double t = series.values.at(row, i);
      if (t != 0.0) acc.add(ha.predict(series.timestamps[row], i), t, delta);
    }
  }
  EvalReport report;
  report.interval_seconds = series.interval();
  for (std::size_t h : usable_horizons(horizons, H)) report.rows.push_back(acc.finish(h, starts.size()));
  report.rows.push_back(acc.finish(0, starts.size()));
  return report;
}

}  // namespace stdiff
