// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "csv.hpp"
#include "stdiff/checkpoint.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/metrics.hpp"

namespace stdiff {

NormStats fit_norm_stats(const DenseTensor& values, std::size_t row_begin, std::size_t row_end,
                         bool skip_missing) {
  if (row_begin >= row_end || row_end > values.rows()) {
    throw ArgumentError("normalisation range [" + std::to_string(row_begin) + ", " +
                        std::to_string(row_end) + ") is empty or out of bounds");
  }
  const std::size_t n = values.cols();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t e = row_begin * n; e < row_end * n; ++e) {
    if (skip_missing && values[e] == 0.0) continue;
    sum += values[e];
    ++count;
  }
  if (count == 0) throw DomainError("normalisation range holds no observed values");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t e = row_begin * n; e < row_end * n; ++e) {
    if (skip_missing && values[e] == 0.0) continue;
    ss += (values[e] - mean) * (values[e] - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(count));
  if (!(sd > 0.0)) throw DomainError("training values are constant; std is 0");
  return {mean, sd};
}

DenseTensor zscore(const DenseTensor& x, const NormStats& stats) {
  if (!(stats.std > 0.0)) throw DomainError("zscore: std must be > 0");
  DenseTensor z = x;
  for (double& v : z.values()) v = (v - stats.mean) / stats.std;
  return z;
}

DenseTensor inverse_zscore(const DenseTensor& z, const NormStats& stats) {
  if (!(stats.std > 0.0)) throw DomainError("inverse_zscore: std must be > 0");
  DenseTensor x = z;
  for (double& v : x.values()) v = v * stats.std + stats.mean;
  return x;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning_rate must be > 0");
  }
  if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) throw ArgumentError("l2_lambda must be >= 0");
  if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ArgumentError("Adam decay rates must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ArgumentError("Adam epsilon must be > 0");
}

void optimizer_step(std::span<ParamArray* const> params, AdamState& state,
                    const TrainConfig& config) {
  if (state.m.empty()) {
    for (const ParamArray* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("optimizer state does not match parameters");
  for (const ParamArray* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + p->name + "'");
  }
  ++state.step;
  const double b1 = config.adam.beta1, b2 = config.adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamArray& p = *params[pi];
    DenseTensor& m = state.m[pi];
    DenseTensor& v = state.v[pi];
    if (m.shape() != p.value.shape()) throw ShapeError("optimizer state shape differs for " + p.name);
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double g = p.grad[e];
      m[e] = b1 * m[e] + (1.0 - b1) * g;
      v[e] = b2 * v[e] + (1.0 - b2) * g * g;
      const double mhat = m[e] / c1;
      const double vhat = v[e] / c2;
      p.value[e] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam.eps);
    }
  }
}

DatasetSplit split_dataset(std::span<const std::size_t> windows, double train_frac,
                           double val_frac, std::size_t purge) {
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0)) {
    throw ArgumentError("split fractions must be positive and leave room for a test split");
  }
  const std::size_t total = windows.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(total)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(total)));
  if (n_train <= purge || n_val <= purge || total <= n_train + n_val) {
    throw ArgumentError(std::to_string(total) + " windows are too few for nonempty splits" +
                        (purge ? " after purging " + std::to_string(purge) + " per boundary" : ""));
  }
  DatasetSplit s;
  s.train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(n_train - purge));
  s.val.assign(windows.begin() + static_cast<std::ptrdiff_t>(n_train),
               windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val - purge));
  s.test.assign(windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), windows.end());
  return s;
}

ForecastData prepare_forecast_data(const SpeedSeries& series, std::size_t T, std::size_t H,
                                   std::size_t stride) {
  if (T == 0 || H == 0) throw ArgumentError("T and H must be >= 1");
  ForecastData d;
  d.T = T;
  d.H = H;
  d.timestamps = series.timestamps;
  d.raw = series.values;
  const auto starts = window_starts(series.steps(), T, H, stride);
  const std::size_t purge = (T + H - 1 + stride - 1) / stride;
  d.split = split_dataset(starts, 0.6, 0.2, purge);
  d.train_rows = d.split.train.back() + T + H;
  d.stats = fit_norm_stats(series.values, 0, d.train_rows);
  d.normalized = zscore(series.values, d.stats);
  return d;
}

Var training_loss(Tape& tape, const IstdGcnModel& model, const ModelVars& vars,
                  const DenseTensor& history, const DenseTensor& target, double lambda,
                  bool squared) {
  const Var pred = model.forward(tape, vars, tape.constant(history));
  return ops::mae_l2_loss(tape, pred, target, vars.all, lambda, squared);
}

namespace {

constexpr const char* kLogHeader = "epoch,train_loss,val_mae,val_rmse,val_mape,wall_time";

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct Progress {
  std::size_t epochs_done = 0;
  std::size_t best_epoch = 0;
  double best_val_mae = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  double wall_offset = 0.0;
};

void save_state(const std::string& path, const std::vector<ParamArray*>& params,
                const AdamState& adam, const std::vector<NamedTensor>& best, const Progress& pr,
                const std::vector<EpochLog>& log) {
  std::vector<NamedTensor> t;
  for (std::size_t i = 0; i < params.size(); ++i) {
    t.push_back({"param/" + params[i]->name, params[i]->value});
    if (!adam.m.empty()) {
      t.push_back({"adam_m/" + params[i]->name, adam.m[i]});
      t.push_back({"adam_v/" + params[i]->name, adam.v[i]});
    }
  }
  for (const auto& b : best) t.push_back({"best/" + b.name, b.value});
  t.push_back({"meta", DenseTensor({5}, {static_cast<double>(pr.epochs_done),
                                         static_cast<double>(adam.step),
                                         static_cast<double>(pr.best_epoch), pr.best_val_mae,
                                         static_cast<double>(pr.bad_epochs)})});
  // Wall-clock times stay out of the state so that reruns are bit-identical.
  DenseTensor rows({log.size(), 5});
  for (std::size_t r = 0; r < log.size(); ++r) {
    const EpochLog& e = log[r];
    const double vals[] = {static_cast<double>(e.epoch), e.train_loss, e.val_mae,
                           e.val_rmse, e.val_mape};
    std::copy(std::begin(vals), std::end(vals), rows.data() + r * 5);
  }
  t.push_back({"log", rows});
  write_checkpoint(path, t);
}

void load_state(const std::string& path, const std::vector<ParamArray*>& params, AdamState& adam,
                std::vector<NamedTensor>& best, Progress& pr, std::vector<EpochLog>& log) {
  const auto tensors = read_checkpoint(path);
  auto find = [&](const std::string& name) -> const DenseTensor* {
    for (const auto& t : tensors) {
      if (t.name == name) return &t.value;
    }
    return nullptr;
  };
  auto require = [&](const std::string& name, const Shape& shape) -> const DenseTensor& {
    const DenseTensor* t = find(name);
    if (!t) throw ShapeError(path + ": training state lacks '" + name + "'");
    if (t->shape() != shape) throw ShapeError(path + ": '" + name + "' has the wrong shape");
    return *t;
  };
  const DenseTensor& meta = require("meta", {5});
  const bool has_moments = meta[1] > 0;
  for (ParamArray* p : params) {
    require("param/" + p->name, p->value.shape());
    if (has_moments) {
      require("adam_m/" + p->name, p->value.shape());
      require("adam_v/" + p->name, p->value.shape());
    }
  }
  adam = {};
  best.clear();
  for (ParamArray* p : params) {
    p->value = *find("param/" + p->name);
    if (has_moments) {
      adam.m.push_back(*find("adam_m/" + p->name));
      adam.v.push_back(*find("adam_v/" + p->name));
    }
    if (const DenseTensor* b = find("best/" + p->name)) best.push_back({p->name, *b});
  }
  if (!best.empty() && best.size() != params.size()) throw ShapeError(path + ": partial best snapshot");
  adam.step = static_cast<std::uint64_t>(meta[1]);
  pr.epochs_done = static_cast<std::size_t>(meta[0]);
  pr.best_epoch = static_cast<std::size_t>(meta[2]);
  pr.best_val_mae = meta[3];
  pr.bad_epochs = static_cast<std::size_t>(meta[4]);
  log.clear();
  if (const DenseTensor* rows = find("log")) {
    if (rows->rank() != 2 || rows->dim(1) != 5) throw ShapeError(path + ": malformed log");
    for (std::size_t r = 0; r < rows->dim(0); ++r) {
      log.push_back({static_cast<std::size_t>(rows->at(r, 0)), rows->at(r, 1), rows->at(r, 2),
                     rows->at(r, 3), rows->at(r, 4), 0.0});
    }
  }
  // Wall times come back from the log CSV beside the state file, if present.
  const auto csv_path = std::filesystem::path(path).parent_path() / "train_log.csv";
  if (std::filesystem::exists(csv_path)) {
    try {
      const auto prior = read_train_log(csv_path.string());
      for (std::size_t r = 0; r < log.size() && r < prior.size(); ++r) {
        if (prior[r].epoch == log[r].epoch) log[r].wall_time = prior[r].wall_time;
      }
    } catch (const FormatError&) {
    }
  }
  if (!log.empty()) pr.wall_offset = log.back().wall_time;
}

void dump_bad_batch(const std::string& path, std::size_t epoch, std::size_t batch,
                    std::span<const std::size_t> starts, double loss) {
  if (path.empty()) return;
  nlohmann::json j;
  j["epoch"] = epoch;
  j["batch"] = batch;
  j["window_starts"] = std::vector<std::size_t>(starts.begin(), starts.end());
  j["loss"] = std::isnan(loss) ? "nan" : (loss > 0 ? "inf" : "-inf");
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

}  // namespace

TrainReport train(IstdGcnModel& model, const ForecastData& data, const TrainConfig& config,
                  const TrainOutputs& outputs) {
  config.validate();
  const ModelConfig& mc = model.config();
  if (mc.T != data.T || mc.H != data.H) {
    throw ArgumentError("model expects T=" + std::to_string(mc.T) + ", H=" + std::to_string(mc.H) +
                        " but the data was windowed with T=" + std::to_string(data.T) +
                        ", H=" + std::to_string(data.H));
  }
  if (data.split.train.empty() || data.split.val.empty()) {
    throw ArgumentError("training needs nonempty train and validation splits");
  }
  const std::vector<ParamArray*> params = model.params();
  AdamState adam;
  Progress pr;
  std::vector<EpochLog> log;
  std::vector<NamedTensor> best;
  if (!outputs.resume_from.empty()) load_state(outputs.resume_from, params, adam, best, pr, log);

  const std::int64_t interval = data.timestamps.size() >= 2 ? data.timestamps[1] - data.timestamps[0] : 300;
  const std::vector<std::size_t> all_horizons;
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;

  for (std::size_t epoch = pr.epochs_done + 1; epoch <= config.epochs; ++epoch) {
    if (config.early_stop_patience > 0 && pr.bad_epochs >= config.early_stop_patience) {
      report.early_stopped = true;
      break;
    }
    std::vector<std::size_t> order = data.split.train;
    if (config.shuffle) {
      std::mt19937_64 rng(epoch_seed(config.seed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size, ++batch_index) {
      const std::span<const std::size_t> chunk(order.data() + b0,
                                               std::min(config.batch_size, order.size() - b0));
      model.zero_grad();
      Tape tape;
      const ModelVars vars = model.bind(tape);
      const Var loss = training_loss(tape, model, vars, batch_history(data.normalized, chunk, mc.T),
                                     batch_target(data.normalized, chunk, mc.T, mc.H),
                                     config.l2_lambda, config.l2_squared);
      const double value = tape.value(loss)[0];
      if (!std::isfinite(value)) {
        dump_bad_batch(outputs.diagnostic_path, epoch, batch_index, chunk, value);
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (first window starts at row " +
                           std::to_string(chunk.front()) + ")");
      }
      tape.backward(loss);
      optimizer_step(params, adam, config);
      loss_sum += value * static_cast<double>(chunk.size());
    }

    const EvalReport val = evaluate(model, data.normalized, data.raw, data.split.val, data.stats,
                                    all_horizons, interval);
    const HorizonMetrics& agg = val.rows.back();
    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.val_mae = agg.mae;
    row.val_rmse = agg.rmse;
    row.val_mape = agg.mape_pct;
    row.wall_time = pr.wall_offset +
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(row);

    if (agg.mae < pr.best_val_mae) {
      pr.best_val_mae = agg.mae;
      pr.best_epoch = epoch;
      pr.bad_epochs = 0;
      best = snapshot(params);
      if (!outputs.best_checkpoint.empty()) write_checkpoint(outputs.best_checkpoint, best);
    } else {
      ++pr.bad_epochs;
    }
    pr.epochs_done = epoch;
    if (!outputs.log_path.empty()) write_train_log(outputs.log_path, log);
    if (!outputs.state_path.empty()) {
      save_state(outputs.state_path, params, adam, best, pr, log);
    }
    if (outputs.on_epoch) outputs.on_epoch(row);
  }

  if (!best.empty()) restore(params, best);
  report.log = log;
  report.best_epoch = pr.best_epoch;
  report.best_val_mae = pr.best_val_mae;
  return report;
}

void write_train_log(const std::string& path, std::span<const EpochLog> log) {
  auto out = csv::open_output(path);
  out << kLogHeader << '\n';
  for (const auto& e : log) {
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ','
        << csv::format_double(e.val_mae) << ',' << csv::format_double(e.val_rmse) << ','
        << csv::format_double(e.val_mape) << ',' << csv::format_double(e.wall_time) << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

std::vector<EpochLog> read_train_log(const std::string& path) {
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != kLogHeader) {
    throw FormatError(path + ": expected header '" + std::string(kLogHeader) + "'");
  }
  std::vector<EpochLog> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto f = csv::split(line);
    if (f.size() != 6) throw FormatError(where + ": expected 6 fields");
    out.push_back({static_cast<std::size_t>(csv::parse_int(f[0], where)),
                   csv::parse_double(f[1], where), csv::parse_double(f[2], where),
                   csv::parse_double(f[3], where), csv::parse_double(f[4], where),
                   csv::parse_double(f[5], where)});
  }
  return out;
}

}  // namespace stdiff
