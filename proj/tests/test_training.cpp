// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stdiff/checkpoint.hpp"
#include "stdiff/data.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/model.hpp"
#include "stdiff/ops.hpp"
#include "stdiff/training.hpp"
#include "test_util.hpp"

namespace stdiff {
namespace {

DenseTensor random_tensor(std::mt19937_64& rng, Shape shape, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  DenseTensor t(std::move(shape));
  for (double& v : t.values()) v = g(rng);
  return t;
}

// n = 5, m = 2, K = 2, d = 4, s = 2, T = 6, H = 2.
ModelConfig tiny_config(std::uint64_t seed = 0) {
  ModelConfig c;
  c.K = 2;
  c.m = 2;
  c.s = 2;
  c.d = 4;
  c.T = 6;
  c.H = 2;
  c.init_seed = seed;
  return c;
}

SyntheticData small_synth(std::size_t steps = 200) {
  SynthSpec spec;
  spec.n = 5;
  spec.steps = steps;
  spec.seed = 3;
  spec.period = 24;
  return generate_synthetic(spec);
}

TEST(Normalization, ZscoreExamplesAndRoundTrip) {
  const NormStats s{10.0, 2.0};
  EXPECT_EQ(zscore(DenseTensor({2}, {10.0, 12.0}), s), DenseTensor({2}, {0.0, 1.0}));
  std::mt19937_64 rng(1);
  const auto x = random_tensor(rng, {50, 3}, 20.0);
  const NormStats r{3.7, 4.9};
  EXPECT_LE(max_abs_diff(inverse_zscore(zscore(x, r), r), x), 1e-12);
  EXPECT_THROW(zscore(x, NormStats{0.0, 0.0}), DomainError);
  EXPECT_THROW(inverse_zscore(x, NormStats{0.0, -1.0}), DomainError);
}

TEST(Normalization, StatsSkipMissingZeros) {
  const DenseTensor v({3, 2}, {1, 0, 3, 5, 0, 0});
  const auto s = fit_norm_stats(v, 0, 3);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(8.0 / 3.0));
  EXPECT_THROW(fit_norm_stats(DenseTensor({2, 2}, {2, 2, 2, 2}), 0, 2), DomainError);
  EXPECT_THROW(fit_norm_stats(v, 2, 4), ArgumentError);
}

TEST(Loss, Examples) {
  Tape t;
  const DenseTensor target({2, 3, 1}, {1, 2, 3, 4, 5, 6});
  const Var same = t.constant(target);
  EXPECT_EQ(t.value(ops::mae_l2_loss(t, same, target, {}, 0.0))[0], 0.0);
  DenseTensor shifted = target;
  for (double& v : shifted.values()) v += 1.0;
  EXPECT_EQ(t.value(ops::mae_l2_loss(t, t.constant(shifted), target, {}, 0.0))[0], 1.0);
  EXPECT_THROW(ops::mae_l2_loss(t, same, DenseTensor({6}), {}, 0.0), ShapeError);
}

TEST(Loss, TrainingLossMatchesScalarOracle) {
  std::mt19937_64 rng(2);
  const auto synth = small_synth();
  for (bool squared : {false, true}) {
    IstdGcnModel model(synth.graph, tiny_config(4));
    const auto history = random_tensor(rng, {3, 6, 5, 1});
    const auto target = random_tensor(rng, {3, 2, 5, 1});
    const double lambda = 0.01;
    Tape t;
    const auto vars = model.bind(t);
    const double got = t.value(training_loss(t, model, vars, history, target, lambda, squared))[0];

    const auto pred = model.predict(history);
    double abs_sum = 0.0;
    for (std::size_t e = 0; e < pred.size(); ++e) abs_sum += std::abs(pred[e] - target[e]);
    double sq = 0.0;
    for (const ParamArray* p : std::as_const(model).params()) {
      for (double v : p->value.values()) sq += v * v;
    }
    const double want = abs_sum / static_cast<double>(pred.size()) + lambda * (squared ? sq : std::sqrt(sq));
    EXPECT_NEAR(got, want, 1e-12);
    EXPECT_GE(got, 0.0);
  }
}

TEST(Adam, ZeroGradientsLeaveParamsUnchanged) {
  ParamArray p("p", DenseTensor({3}, {1, -2, 3}));
  const auto before = p.value;
  AdamState state;
  TrainConfig cfg;
  ParamArray* params[] = {&p};
  for (int i = 0; i < 10; ++i) optimizer_step(params, state, cfg);
  EXPECT_EQ(p.value, before);
  EXPECT_EQ(state.step, 10u);
}

TEST(Adam, ScalarQuadraticConverges) {
  ParamArray p("x", DenseTensor({1}, {0.0}));
  AdamState state;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  ParamArray* params[] = {&p};
  for (int i = 0; i < 2000; ++i) {
    p.grad[0] = 2.0 * (p.value[0] - 3.0);
    optimizer_step(params, state, cfg);
  }
  EXPECT_NEAR(p.value[0], 3.0, 1e-6);
}

TEST(Adam, DeterministicAndRejectsNonFinite) {
  auto run = [] {
    std::mt19937_64 rng(7);
    ParamArray p("w", random_tensor(rng, {4, 4}));
    AdamState state;
    TrainConfig cfg;
    ParamArray* params[] = {&p};
    for (int i = 0; i < 20; ++i) {
      p.grad = random_tensor(rng, {4, 4});
      optimizer_step(params, state, cfg);
    }
    return p.value;
  };
  EXPECT_EQ(run(), run());

  ParamArray p("decoder.w1", DenseTensor({2}));
  p.grad[1] = std::nan("");
  AdamState state;
  ParamArray* params[] = {&p};
  try {
    optimizer_step(params, state, TrainConfig{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.w1"), std::string::npos);
  }
}

TEST(Split, TenWindows) {
  std::vector<std::size_t> w(10);
  for (std::size_t i = 0; i < 10; ++i) w[i] = i;
  const auto s = split_dataset(w);
  EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(s.val, (std::vector<std::size_t>{6, 7}));
  EXPECT_EQ(s.test, (std::vector<std::size_t>{8, 9}));
  const auto purged = split_dataset(w, 0.6, 0.2, 1);
  EXPECT_EQ(purged.train.size(), 5u);
  EXPECT_EQ(purged.val, (std::vector<std::size_t>{6}));
  EXPECT_EQ(purged.test.size(), 2u);
  EXPECT_THROW(split_dataset(std::vector<std::size_t>{0, 1, 2}), ArgumentError);
  EXPECT_THROW(split_dataset(w, 0.6, 0.2, 2), ArgumentError);
}

TEST(Split, StatsComeFromTrainingRowsOnly) {
  const auto synth = small_synth(400);
  const auto data = prepare_forecast_data(synth.series, 6, 2);
  EXPECT_EQ(data.train_rows, data.split.train.back() + 6 + 2);
  // Purged windows: no training target reaches a validation history.
  EXPECT_LE(data.train_rows, data.split.val.front());
  EXPECT_LE(data.split.val.back() + 6 + 2, data.split.test.front());

  double sum = 0.0, count = 0.0;
  const auto& v = synth.series.values;
  for (std::size_t e = 0; e < data.train_rows * 5; ++e) {
    if (v[e] != 0.0) {
      sum += v[e];
      count += 1.0;
    }
  }
  const double mean = sum / count;
  double ss = 0.0;
  for (std::size_t e = 0; e < data.train_rows * 5; ++e) {
    if (v[e] != 0.0) ss += (v[e] - mean) * (v[e] - mean);
  }
  EXPECT_NEAR(data.stats.mean, mean, 1e-10);
  EXPECT_NEAR(data.stats.std, std::sqrt(ss / count), 1e-10);

  // Changing validation and test rows leaves the statistics untouched.
  auto altered = synth.series;
  for (std::size_t e = data.train_rows * 5; e < altered.values.size(); ++e) altered.values[e] += 1000.0;
  const auto again = prepare_forecast_data(altered, 6, 2);
  EXPECT_EQ(again.stats.mean, data.stats.mean);
  EXPECT_EQ(again.stats.std, data.stats.std);
}

ForecastData four_sample_data(const SyntheticData& synth) {
  ForecastData d;
  d.T = 6;
  d.H = 2;
  d.timestamps = synth.series.timestamps;
  d.raw = synth.series.values;
  d.split.train = {0, 1, 2, 3};
  d.split.val = {20, 21};
  d.split.test = {40};
  d.train_rows = 3 + 6 + 2;
  d.stats = fit_norm_stats(d.raw, 0, d.train_rows);
  d.normalized = zscore(d.raw, d.stats);
  return d;
}

TEST(Train, OneEpochOnFourSamples) {
  testutil::TempDir dir;
  const auto synth = small_synth();
  IstdGcnModel model(synth.graph, tiny_config());
  TrainConfig cfg;
  cfg.epochs = 1;
  TrainOutputs out;
  out.log_path = dir / "log.csv";
  out.best_checkpoint = dir / "best.ckpt";
  const auto report = train(model, four_sample_data(synth), cfg, out);
  ASSERT_EQ(report.log.size(), 1u);
  EXPECT_EQ(report.best_epoch, 1u);
  EXPECT_TRUE(std::isfinite(report.log[0].train_loss));
  EXPECT_EQ(read_train_log(dir / "log.csv").size(), 1u);
  EXPECT_EQ(testutil::read_file(dir / "log.csv").substr(0, 53),
            "epoch,train_loss,val_mae,val_rmse,val_mape,wall_time\n");
  EXPECT_EQ(read_checkpoint(dir / "best.ckpt").size(), model.params().size());
}

TEST(Train, SingleBatchLossNonincreasingAtSmallLearningRate) {
  const auto synth = small_synth();
  const auto data = four_sample_data(synth);
  // One batch of the default size (32 consecutive windows).
  std::vector<std::size_t> batch(TrainConfig{}.batch_size);
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  const auto history = batch_history(data.normalized, batch, 6);
  const auto target = batch_target(data.normalized, batch, 6, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    IstdGcnModel model(synth.graph, tiny_config(seed));
    const auto params = model.params();
    AdamState state;
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (int step = 0; step < 50; ++step) {
      model.zero_grad();
      Tape t;
      const auto vars = model.bind(t);
      const Var loss = training_loss(t, model, vars, history, target, cfg.l2_lambda, false);
      const double value = t.value(loss)[0];
      if (value > prev) monotone = false;
      prev = value;
      t.backward(loss);
      optimizer_step(params, state, cfg);
    }
    if (!monotone) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(Train, CheckpointRestoreGivesBitIdenticalForward) {
  testutil::TempDir dir;
  std::mt19937_64 rng(9);
  const auto synth = small_synth();
  IstdGcnModel a(synth.graph, tiny_config(1));
  for (ParamArray* p : a.params()) p->value = random_tensor(rng, p->value.shape());
  write_checkpoint(dir / "a.ckpt", snapshot(a.params()));
  IstdGcnModel b(synth.graph, tiny_config(2));
  const auto loaded = read_checkpoint(dir / "a.ckpt");
  restore(b.params(), loaded);
  const auto x = random_tensor(rng, {3, 6, 5, 1});
  EXPECT_EQ(a.predict(x), b.predict(x));
}

bool same_log(const std::vector<EpochLog>& a, const std::vector<EpochLog>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].epoch != b[i].epoch || a[i].train_loss != b[i].train_loss ||
        a[i].val_mae != b[i].val_mae || a[i].val_rmse != b[i].val_rmse ||
        a[i].val_mape != b[i].val_mape) {
      return false;
    }
  }
  return true;
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  testutil::TempDir dir;
  const auto synth = small_synth(300);
  const auto data = prepare_forecast_data(synth.series, 6, 2, 4);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 11;

  IstdGcnModel full(synth.graph, tiny_config());
  const auto straight = train(full, data, cfg);

  IstdGcnModel first(synth.graph, tiny_config());
  TrainConfig half = cfg;
  half.epochs = 2;
  TrainOutputs out;
  out.state_path = dir / "state.ckpt";
  train(first, data, half, out);

  IstdGcnModel resumed(synth.graph, tiny_config(99));  // state overrides the init
  TrainOutputs again;
  again.resume_from = dir / "state.ckpt";
  const auto continued = train(resumed, data, cfg, again);

  EXPECT_TRUE(same_log(straight.log, continued.log));
  EXPECT_EQ(continued.best_epoch, straight.best_epoch);
  EXPECT_EQ(snapshot(resumed.params()), snapshot(full.params()));
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto synth = small_synth(300);
  const auto data = prepare_forecast_data(synth.series, 6, 2, 4);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  IstdGcnModel a(synth.graph, tiny_config());
  IstdGcnModel b(synth.graph, tiny_config());
  const auto ra = train(a, data, cfg);
  const auto rb = train(b, data, cfg);
  EXPECT_TRUE(same_log(ra.log, rb.log));
  EXPECT_EQ(snapshot(a.params()), snapshot(b.params()));
}

TEST(Train, NonFiniteLossAbortsWithDiagnostic) {
  testutil::TempDir dir;
  const auto synth = small_synth();
  auto data = four_sample_data(synth);
  data.normalized.at(2, 0) = std::nan("");  // inside every training window
  IstdGcnModel model(synth.graph, tiny_config());
  TrainConfig cfg;
  cfg.epochs = 3;
  TrainOutputs out;
  out.diagnostic_path = dir / "nan.json";
  try {
    train(model, data, cfg, out);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
  }
  const std::string dump = testutil::read_file(dir / "nan.json");
  EXPECT_NE(dump.find("\"batch\""), std::string::npos);
}

TEST(Train, EarlyStoppingAndConfigValidation) {
  const auto synth = small_synth(300);
  const auto data = prepare_forecast_data(synth.series, 6, 2, 4);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.5;  // overshoots, so validation MAE stops improving
  cfg.early_stop_patience = 2;
  IstdGcnModel model(synth.graph, tiny_config());
  const auto report = train(model, data, cfg);
  EXPECT_TRUE(report.early_stopped);
  ASSERT_LT(report.log.size(), 50u);
  EXPECT_EQ(report.log.size(), report.best_epoch + 2);

  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = TrainConfig{};
  bad.batch_size = 0;
  EXPECT_THROW(train(model, data, bad), ArgumentError);
  auto other = tiny_config();
  other.T = 7;
  IstdGcnModel mismatched(synth.graph, other);
  EXPECT_THROW(train(mismatched, data, TrainConfig{}), ArgumentError);
}

}  // namespace
}  // namespace stdiff
