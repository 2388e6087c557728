// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "stdiff/data.hpp"
#include "stdiff/errors.hpp"
#include "test_util.hpp"

namespace stdiff {
namespace {

TEST(SpeedCsv, ParsesExactValuesAndMissingCells) {
  testutil::TempDir dir;
  testutil::write_file(dir / "s.csv",
                       "timestamp,a,b\n"
                       "1335830400,61.5,0.1\n"
                       "1335830700,,64.25\n"
                       "1335831000,0,1e2\n");
  const auto s = load_speed_csv(dir / "s.csv");
  EXPECT_EQ(s.vertex_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(s.steps(), 3u);
  EXPECT_EQ(s.interval(), 300);
  EXPECT_EQ(s.values, DenseTensor({3, 2}, {61.5, 0.1, 0.0, 64.25, 0.0, 100.0}));
}

TEST(SpeedCsv, RoundTripIsExact) {
  testutil::TempDir dir;
  SpeedSeries s;
  s.vertex_ids = {"773869", "767541", "767542"};
  s.timestamps = {100, 160, 220, 280};
  s.values = DenseTensor({4, 3});
  for (std::size_t e = 0; e < 12; ++e) s.values[e] = 1.0 / 3.0 + static_cast<double>(e) * 7.1;
  s.values[5] = 0.0;
  write_speed_csv(dir / "s.csv", s);
  const auto back = load_speed_csv(dir / "s.csv");
  EXPECT_EQ(back.timestamps, s.timestamps);
  EXPECT_EQ(back.vertex_ids, s.vertex_ids);
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(back.interval(), 60);
}

TEST(SpeedCsv, FormatErrors) {
  testutil::TempDir dir;
  testutil::write_file(dir / "gap.csv", "timestamp,a\n0,1\n300,1\n900,1\n");
  EXPECT_THROW(load_speed_csv(dir / "gap.csv"), FormatError);
  testutil::write_file(dir / "hdr.csv", "time,a\n0,1\n");
  EXPECT_THROW(load_speed_csv(dir / "hdr.csv"), FormatError);
  testutil::write_file(dir / "ragged.csv", "timestamp,a,b\n0,1\n");
  EXPECT_THROW(load_speed_csv(dir / "ragged.csv"), FormatError);
  testutil::write_file(dir / "back.csv", "timestamp,a\n300,1\n0,1\n");
  EXPECT_THROW(load_speed_csv(dir / "back.csv"), FormatError);
  testutil::write_file(dir / "text.csv", "timestamp,a\n0,fast\n");
  EXPECT_THROW(load_speed_csv(dir / "text.csv"), FormatError);
  EXPECT_THROW(load_speed_csv(dir / "absent.csv"), FormatError);
}

TEST(SpeedCsv, VertexOrderMustMatchGraph) {
  SpeedSeries s;
  s.vertex_ids = {"a", "b"};
  const SensorGraph same({"a", "b"}, SparseMatrix(2, 2));
  const SensorGraph swapped({"b", "a"}, SparseMatrix(2, 2));
  const SensorGraph bigger({"a", "b", "c"}, SparseMatrix(3, 3));
  EXPECT_NO_THROW(check_vertex_order(s, same));
  EXPECT_THROW(check_vertex_order(s, swapped), IdentifierError);
  EXPECT_THROW(check_vertex_order(s, bigger), IdentifierError);
}

TEST(Windows, CountsMatchBruteForce) {
  for (std::size_t len = 1; len <= 100; ++len) {
    for (std::size_t T = 1; T <= 13; T += 3) {
      for (std::size_t H = 1; H <= 13; H += 4) {
        for (std::size_t stride = 1; stride <= 5; ++stride) {
          std::vector<std::size_t> brute;
          for (std::size_t s = 0; s + T + H <= len; s += stride) brute.push_back(s);
          if (brute.empty()) {
            EXPECT_THROW(window_count(len, T, H, stride), ArgumentError);
            continue;
          }
          EXPECT_EQ(window_count(len, T, H, stride), brute.size());
          EXPECT_EQ(window_starts(len, T, H, stride), brute);
        }
      }
    }
  }
  EXPECT_THROW(window_count(10, 2, 2, 0), ArgumentError);
}

TEST(Windows, SamplesAndBatchesSliceTheRightRows) {
  SpeedSeries s;
  s.vertex_ids = {"a", "b"};
  for (std::int64_t t = 0; t < 10; ++t) s.timestamps.push_back(300 * t);
  s.values = DenseTensor({10, 2});
  for (std::size_t t = 0; t < 10; ++t) {
    s.values.at(t, 0) = static_cast<double>(t);
    s.values.at(t, 1) = 100.0 + static_cast<double>(t);
  }
  const auto w = make_windows(s, 3, 2, 2);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[1].start_index, 2u);
  EXPECT_EQ(w[1].history.shape(), (Shape{3, 2, 1}));
  EXPECT_EQ(w[1].history, DenseTensor({3, 2, 1}, {2, 102, 3, 103, 4, 104}));
  EXPECT_EQ(w[1].target, DenseTensor({2, 2, 1}, {5, 105, 6, 106}));

  const std::vector<std::size_t> starts{4, 0};
  const auto hist = batch_history(s.values, starts, 3);
  const auto tgt = batch_target(s.values, starts, 3, 2);
  ASSERT_EQ(hist.shape(), (Shape{2, 3, 2, 1}));
  EXPECT_EQ(hist[0], 4.0);
  EXPECT_EQ(hist[6], 0.0);
  EXPECT_EQ(tgt[0], 7.0);
  EXPECT_EQ(tgt[4], 3.0);
  EXPECT_THROW(batch_target(s.values, std::vector<std::size_t>{6}, 3, 2), ArgumentError);
}

SynthSpec quiet_spec() {
  SynthSpec spec;
  spec.n = 6;
  spec.steps = 200;
  spec.seed = 4;
  spec.period = 24;
  spec.noise_std = 0.0;
  return spec;
}

TEST(Synthetic, SameSeedIsBitIdentical) {
  SynthSpec spec;
  spec.n = 7;
  spec.steps = 300;
  spec.seed = 12;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(a.series.values, b.series.values);
  EXPECT_EQ(a.graph.adjacency(), b.graph.adjacency());
  EXPECT_EQ(a.series.timestamps, b.series.timestamps);
  spec.seed = 13;
  EXPECT_NE(generate_synthetic(spec).series.values, a.series.values);
}

TEST(Synthetic, NoiselessSeasonalSeriesIsPeriodic) {
  const auto spec = quiet_spec();
  const auto d = generate_synthetic(spec);
  const std::size_t p = 24;
  for (std::size_t t = 0; t + p < spec.steps; ++t) {
    for (std::size_t i = 0; i < spec.n; ++i) {
      EXPECT_NEAR(d.series.values.at(t + p, i), d.series.values.at(t, i), 1e-9);
    }
  }
}

TEST(Synthetic, AlphaZeroReproducesDrive) {
  auto spec = quiet_spec();
  spec.alpha = 0.0;
  const auto d = generate_synthetic(spec);
  EXPECT_EQ(d.series.values, d.drive);
  spec.dynamics = SynthDynamics::kDiffusion;
  const auto flat = generate_synthetic(spec);
  for (std::size_t t = 1; t < spec.steps; ++t) {
    for (std::size_t i = 0; i < spec.n; ++i) EXPECT_EQ(flat.series.values.at(t, i), flat.series.values.at(0, i));
  }
}

TEST(Synthetic, GraphAndTransitionInvariants) {
  SynthSpec spec;
  spec.n = 12;
  spec.steps = 10;
  const auto d = generate_synthetic(spec);
  for (double s : d.transition.row_sums()) EXPECT_NEAR(s, 1.0, 1e-12);
  const auto& w = d.graph.adjacency();
  for (std::size_t i = 0; i < spec.n; ++i) {
    EXPECT_GE(w.row_cols(i).size(), 2u);  // itself plus at least its nearest neighbour
    for (std::size_t j = 0; j < spec.n; ++j) EXPECT_EQ(w.at(i, j), w.at(j, i));
  }
  EXPECT_EQ(d.series.timestamps.front(), 1335830400);
  EXPECT_EQ(d.series.interval(), 300);
}

TEST(Synthetic, SpecParsing) {
  const auto spec = parse_synth_spec(R"({"n": 4, "steps": 50, "seed": 9, "alpha": 0.5,
                                          "period": 12, "noise_std": 0.2, "dynamics": "diffusion"})");
  EXPECT_EQ(spec.n, 4u);
  EXPECT_EQ(spec.steps, 50u);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.alpha, 0.5);
  EXPECT_EQ(spec.dynamics, SynthDynamics::kDiffusion);
  EXPECT_THROW(parse_synth_spec(R"({"n": 4, "colour": 1})"), FormatError);
  EXPECT_THROW(parse_synth_spec(R"({"dynamics": "chaos"})"), FormatError);
  EXPECT_THROW(parse_synth_spec("[1, 2"), FormatError);
  SynthSpec bad;
  bad.alpha = 1.0;
  EXPECT_THROW(generate_synthetic(bad), DomainError);
}

}  // namespace
}  // namespace stdiff
