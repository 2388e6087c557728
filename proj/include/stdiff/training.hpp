// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stdiff/data.hpp"
#include "stdiff/model.hpp"
#include "stdiff/tape.hpp"
#include "stdiff/tensor.hpp"

namespace stdiff {

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Mean and population std of rows [row_begin, row_end) of a [time, n]
/// matrix, skipping zeros (missing readings) when `skip_missing` is set.
NormStats fit_norm_stats(const DenseTensor& values, std::size_t row_begin, std::size_t row_end,
                         bool skip_missing = true);
DenseTensor zscore(const DenseTensor& x, const NormStats& stats);
DenseTensor inverse_zscore(const DenseTensor& z, const NormStats& stats);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  double l2_lambda = 1e-4;
  bool l2_squared = false;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::size_t early_stop_patience = 10;  // 0 disables early stopping
  std::uint64_t seed = 0;
  bool shuffle = true;
  AdamOptions adam;

  /// Throws ArgumentError on invalid values.
  void validate() const;
};

struct AdamState {
  std::vector<DenseTensor> m;
  std::vector<DenseTensor> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update from each ParamArray::grad. Throws
/// NumericError naming the parameter if a gradient is not finite.
void optimizer_step(std::span<ParamArray* const> params, AdamState& state,
                    const TrainConfig& config);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Chronological split of window starts: floor(0.6 N) train, floor(0.2 N)
/// validation, the rest test. `purge` windows are then dropped from the end
/// of train and of validation so no target overlaps the next split.
DatasetSplit split_dataset(std::span<const std::size_t> windows, double train_frac = 0.6,
                           double val_frac = 0.2, std::size_t purge = 0);

/// A series prepared for training: z-scored with training-range statistics.
struct ForecastData {
  std::size_t T = 12;
  std::size_t H = 12;
  std::vector<std::int64_t> timestamps;
  DenseTensor raw;         // [time, n]
  DenseTensor normalized;  // [time, n]
  NormStats stats;
  DatasetSplit split;
  std::size_t train_rows = 0;  // rows [0, train_rows) feed the statistics
};

/// Windows every `stride` steps, split 60/20/20 with a T + H - 1 purge.
ForecastData prepare_forecast_data(const SpeedSeries& series, std::size_t T, std::size_t H,
                                   std::size_t stride = 1);

/// MAE plus L2 penalty of the model on one batch of normalised windows.
Var training_loss(Tape& tape, const IstdGcnModel& model, const ModelVars& vars,
                  const DenseTensor& history, const DenseTensor& target, double lambda,
                  bool squared);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double val_rmse = 0.0;
  double val_mape = 0.0;
  double wall_time = 0.0;  // seconds since the run began
};

struct TrainOutputs {
  std::string best_checkpoint;  // best parameters, rewritten on improvement
  std::string state_path;       // resumable state, rewritten every epoch
  std::string log_path;         // per-epoch CSV, rewritten every epoch
  std::string diagnostic_path;  // JSON dump of the batch behind a NaN loss
  std::string resume_from;      // state file written by an earlier run
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainReport {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  bool early_stopped = false;
};

/// Minibatch Adam on the training windows with validation MAE tracking and
/// early stopping. On return the model holds the best parameters. A
/// non-finite loss throws NumericError naming the epoch and batch.
TrainReport train(IstdGcnModel& model, const ForecastData& data, const TrainConfig& config,
                  const TrainOutputs& outputs = {});

void write_train_log(const std::string& path, std::span<const EpochLog> log);
std::vector<EpochLog> read_train_log(const std::string& path);

}  // namespace stdiff
