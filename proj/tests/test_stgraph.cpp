// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/graph.hpp"
#include "stdiff/stgraph.hpp"

namespace stdiff {
namespace {

SensorGraph graph_from(const oracle::Mat& w) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < w.size(); ++i) ids.push_back("s" + std::to_string(i));
  return SensorGraph(ids, oracle::sparsify(w));
}

StGraphOptions with_hops(std::size_t hops, bool self_loops = true) {
  StGraphOptions o;
  o.hops = hops;
  o.self_loops = self_loops;
  return o;
}

TEST(Hstg, TwoSensorsTwoSnapshotsByHand) {
  const auto g = build_hstg(graph_from({{0, 1}, {1, 0}}), 2);
  const oracle::Mat adj{{1, 1, 1, 0}, {1, 1, 0, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}};
  EXPECT_EQ(oracle::densify(g.hstg_adjacency()), adj);
  const double t = 1.0 / 3.0;
  const oracle::Mat p{{t, t, t, 0}, {t, t, 0, t}, {0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}};
  EXPECT_LE(oracle::max_abs_diff(oracle::densify(g.hstg_transition()), p), 1e-15);
  const oracle::Mat pnh{{0.5, 0.5, 0, 0}, {0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}};
  EXPECT_EQ(oracle::densify(g.nhstg_transition()), pnh);
}

TEST(Hstg, SingleSensorShift) {
  const auto g = build_hstg(graph_from({{0}}), 3, with_hops(1, false));
  EXPECT_EQ(oracle::densify(g.hstg_adjacency()), (oracle::Mat{{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}));
  const auto loops = build_hstg(graph_from({{0}}), 3);
  EXPECT_EQ(oracle::densify(loops.hstg_transition()),
            (oracle::Mat{{0.5, 0.5, 0}, {0, 0.5, 0.5}, {0, 0, 1}}));
}

TEST(Hstg, ShiftPowersAreNilpotent) {
  const auto g = build_hstg(graph_from({{0}}), 3, with_hops(3, false));
  EXPECT_EQ(oracle::densify(g.hstg_power(2)), (oracle::Mat{{0, 0, 1}, {0, 0, 0}, {0, 0, 0}}));
  EXPECT_EQ(g.hstg_power(3).nnz(), 0u);
  EXPECT_EQ(g.nhstg_power(3).nnz(), 0u);
}

TEST(Hstg, TransposedDirectionPlacesCouplingBelow) {
  StGraphOptions o;
  o.direction = TemporalDirection::kTransposed;
  const auto w = oracle::Mat{{0, 1}, {1, 0}};
  const auto g = build_hstg(graph_from(w), 3, o);
  const auto s = oracle::add(w, oracle::identity(2));
  EXPECT_EQ(oracle::densify(g.hstg_adjacency()), oracle::hstg_blocks(s, oracle::identity(2), 3, true));
}

TEST(Hstg, CustomCouplingAndErrors) {
  const oracle::Mat w{{0, 2}, {2, 0}};
  const oracle::Mat c{{0.5, 0.25}, {0, 1}};
  StGraphOptions o;
  o.coupling = oracle::sparsify(c);
  const auto g = build_hstg(graph_from(w), 2, o);
  EXPECT_EQ(oracle::densify(g.hstg_adjacency()),
            oracle::hstg_blocks(oracle::add(w, oracle::identity(2)), c, 2, false));

  EXPECT_THROW(build_hstg(graph_from(w), 1), ArgumentError);
  o.coupling = oracle::sparsify({{-1, 0}, {0, 1}});
  EXPECT_THROW(build_hstg(graph_from(w), 2, o), DomainError);
  o.coupling = SparseMatrix::identity(3);
  EXPECT_THROW(build_hstg(graph_from(w), 2, o), ShapeError);
  EXPECT_THROW(build_hstg(graph_from(w), 2, with_hops(0)), ArgumentError);
}

TEST(Hstg, BlockStructureInvariants) {
  std::mt19937_64 rng(17);
  for (std::size_t m = 2; m <= 5; ++m) {
    auto w = oracle::random_nonneg(rng, 5, 5, 0.5);
    const auto g = build_hstg(graph_from(w), m, with_hops(1));
    const auto ph = oracle::densify(g.hstg_transition());
    const auto pnh = oracle::densify(g.nhstg_transition());
    for (std::size_t r = 0; r < m * 5; ++r) {
      double sh = 0.0, snh = 0.0;
      for (std::size_t c = 0; c < m * 5; ++c) {
        const std::size_t tr = r / 5, tc = c / 5;
        // HSTG: only diagonal and first super-diagonal blocks.
        if (tc != tr && tc != tr + 1) {
          EXPECT_EQ(ph[r][c], 0.0);
        }
        // NHSTG: block diagonal with identical blocks.
        if (tc != tr) {
          EXPECT_EQ(pnh[r][c], 0.0);
        } else {
          EXPECT_EQ(pnh[r][c], pnh[r % 5][c % 5]);
        }
        sh += ph[r][c];
        snh += pnh[r][c];
      }
      EXPECT_NEAR(sh, 1.0, 1e-12);
      EXPECT_NEAR(snh, 1.0, 1e-12);
    }
  }
}

TEST(Hstg, RandomDenseOracleWithPowers) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const std::size_t m = 2 + trial % 4;
    const std::size_t K = 1 + trial % 4;
    const auto w = oracle::random_nonneg(rng, n, n, 0.4);
    const auto g = build_hstg(graph_from(w), m, with_hops(K));
    ASSERT_EQ(g.hops(), K);
    const auto s = oracle::add(w, oracle::identity(n));
    const auto ph = oracle::row_normalize(oracle::hstg_blocks(s, oracle::identity(n), m, false));
    const auto pnh = oracle::row_normalize(oracle::nhstg_blocks(s, m));
    for (std::size_t k = 1; k <= K; ++k) {
      EXPECT_LE(oracle::max_abs_diff(oracle::densify(g.hstg_power(k)), oracle::power(ph, k)), 1e-12);
      EXPECT_LE(oracle::max_abs_diff(oracle::densify(g.nhstg_power(k)), oracle::power(pnh, k)), 1e-12);
    }
    EXPECT_LE(oracle::max_abs_diff(oracle::densify(build_nhstg(graph_from(w), m)), pnh), 1e-15);
  }
}

TEST(HopPower, MatchesRepeatedProduct) {
  std::mt19937_64 rng(29);
  const auto p = oracle::row_normalize(oracle::random_nonneg(rng, 6, 6, 0.5));
  for (std::size_t k = 1; k <= 5; ++k) {
    EXPECT_LE(oracle::max_abs_diff(oracle::densify(hop_power(oracle::sparsify(p), k)),
                                   oracle::power(p, k)),
              1e-12);
  }
  EXPECT_THROW(hop_power(oracle::sparsify(p), 0), ArgumentError);
}

TEST(StackFeatures, FlatIndexIsSnapshotMajor) {
  std::vector<DenseTensor> snaps;
  for (int t = 0; t < 3; ++t) {
    DenseTensor s({2, 2});
    for (std::size_t e = 0; e < 4; ++e) s[e] = 10.0 * t + static_cast<double>(e);
    snaps.push_back(s);
  }
  const auto x = stack_features(snaps);
  ASSERT_EQ(x.shape(), (Shape{3, 2, 2}));
  const auto flat = x.reshaped({6, 2});
  // Row t * n + i holds vertex i of snapshot t.
  EXPECT_EQ(flat.at(2 * 2 + 1, 0), 22.0);
  EXPECT_EQ(flat.at(1 * 2 + 0, 1), 11.0);
  snaps[1] = DenseTensor({3, 2});
  EXPECT_THROW(stack_features(snaps), ShapeError);
  EXPECT_THROW(stack_features({}), ShapeError);
}

TEST(Hstg, PropagationMatchesDenseOracleOnFeatures) {
  std::mt19937_64 rng(31);
  const auto w = oracle::random_nonneg(rng, 4, 4, 0.5);
  const auto g = build_hstg(graph_from(w), 3, with_hops(2));
  const auto x = oracle::random_normal(rng, 12, 3);
  const auto y = spmm(g.hstg_power(2), oracle::to_tensor(x));
  EXPECT_LE(oracle::max_abs_diff(oracle::from_tensor(y), oracle::matmul(oracle::densify(g.hstg_power(2)), x)),
            1e-12);
}

}  // namespace
}  // namespace stdiff
