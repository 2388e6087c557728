// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/model.hpp"
#include "stdiff/ops.hpp"

namespace stdiff {
namespace {

using oracle::Mat;

SensorGraph graph_from(const Mat& w) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < w.size(); ++i) ids.push_back("s" + std::to_string(i));
  return SensorGraph(ids, oracle::sparsify(w));
}

Mat random_symmetric_graph(std::mt19937_64& rng, std::size_t n) {
  Mat w = oracle::random_nonneg(rng, n, n, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    w[i][i] = 0.0;
    for (std::size_t j = 0; j < i; ++j) w[i][j] = w[j][i];
  }
  return w;
}

ModelConfig tiny_config(Ablation a = Ablation::kFull) {
  ModelConfig c;
  c.K = 2;
  c.m = 3;
  c.s = 2;
  c.d = 3;
  c.T = 7;
  c.H = 2;
  c.ablation = a;
  c.init_seed = 5;
  return c;
}

DenseTensor random_tensor(std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseTensor t(std::move(shape));
  for (double& v : t.values()) v = g(rng);
  return t;
}

std::map<std::string, const ParamArray*> by_name(const IstdGcnModel& model) {
  std::map<std::string, const ParamArray*> out;
  for (const ParamArray* p : model.params()) out[p->name] = p;
  return out;
}

// Transition matrices over `snaps` snapshots, rebuilt from the raw adjacency.
struct DenseTransitions {
  Mat p_nh;
  Mat p_h;
};

DenseTransitions dense_transitions(const Mat& w, std::size_t snaps) {
  const Mat s = oracle::add(w, oracle::identity(w.size()));
  return {oracle::row_normalize(oracle::nhstg_blocks(s, snaps)),
          oracle::row_normalize(oracle::hstg_blocks(s, oracle::identity(w.size()), snaps, false))};
}

// Whole-model reference forward for one window [T, n, 1] using only dense loops.
Mat reference_forward(const IstdGcnModel& model, const Mat& w, const DenseTensor& window) {
  const ModelConfig c = model.config().resolved();
  const std::size_t n = w.size();
  const auto p = by_name(model);
  Mat x_in = oracle::zeros(c.T * n, c.d_in);
  for (std::size_t r = 0; r < c.T * n; ++r) x_in[r][0] = window[r];
  const Mat embedded = oracle::matmul(x_in, oracle::from_tensor(p.at("input_embed")->value));

  auto rows_of = [&](std::size_t snap) {
    return Mat(embedded.begin() + static_cast<long>(snap * n),
               embedded.begin() + static_cast<long>((snap + 1) * n));
  };
  auto vec = [](const ParamArray* a) {
    return std::vector<double>(a->value.values().begin(), a->value.values().end());
  };

  Mat compressed;
  std::size_t next = 0;
  while (next < c.T) {
    Mat x;
    if (!compressed.empty()) x = compressed;
    const std::size_t take = compressed.empty() ? c.m : std::min(c.m - 1, c.T - next);
    for (std::size_t t = 0; t < take; ++t) {
      const Mat r = rows_of(next + t);
      x.insert(x.end(), r.begin(), r.end());
    }
    next += take;
    const std::size_t snaps = x.size() / n;
    const auto tr = dense_transitions(w, snaps);
    Mat joined = oracle::zeros(n, 0);
    for (std::size_t ch = 0; ch < c.s; ++ch) {
      const std::string pre = "channel" + std::to_string(ch) + ".";
      std::vector<Mat> th_nh, th_h;
      for (std::size_t k = 1; k <= c.K; ++k) {
        if (c.ablation != Ablation::kNoTwoStep) {
          th_nh.push_back(oracle::from_tensor(p.at(pre + "theta_nh." + std::to_string(k))->value));
        }
        if (c.ablation != Ablation::kNoHstg) {
          th_h.push_back(oracle::from_tensor(p.at(pre + "theta_h." + std::to_string(k))->value));
        }
      }
      const Mat h = oracle::stsc(x, tr.p_nh, tr.p_h, th_nh, th_h, vec(p.at(pre + "ln_scale")),
                                 vec(p.at(pre + "ln_shift")), c.ln_eps);
      const Mat kernel = oracle::from_tensor(p.at(pre + "compress")->value);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < c.d; ++f) {
          double acc = 0.0;
          for (std::size_t t = 0; t < snaps; ++t) acc += h[t * n + i][f] * kernel[t][f];
          joined[i].push_back(acc);
        }
      }
    }
    compressed = oracle::matmul(joined, oracle::from_tensor(p.at("mix")->value));
  }

  Mat hidden = oracle::matmul(compressed, oracle::from_tensor(p.at("decoder.w1")->value));
  const auto b1 = vec(p.at("decoder.b1"));
  for (auto& row : hidden) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = std::max(0.0, row[j] + b1[j]);
  }
  Mat flat = oracle::matmul(hidden, oracle::from_tensor(p.at("decoder.w2")->value));
  const auto b2 = vec(p.at("decoder.b2"));
  Mat out = oracle::zeros(c.H, n);  // [h][i] with d_out = 1
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < c.H; ++h) out[h][i] = flat[i][h] + b2[h];
  }
  return out;
}

ChannelVars bind_channel(Tape& t, const std::vector<Mat>& nh, const std::vector<Mat>& h,
                         std::size_t d) {
  ChannelVars v;
  for (const auto& m : nh) v.theta_nh.push_back(t.constant(oracle::to_tensor(m)));
  for (const auto& m : h) v.theta_h.push_back(t.constant(oracle::to_tensor(m)));
  v.ln_scale = t.constant(DenseTensor({d}, 1.0));
  v.ln_shift = t.constant(DenseTensor({d}));
  return v;
}

TEST(Stsc, ZeroThetaReducesToLayerNorm) {
  std::mt19937_64 rng(1);
  const Mat w = random_symmetric_graph(rng, 4);
  StGraphOptions o;
  o.hops = 3;
  const auto g = build_hstg(graph_from(w), 2, o);
  const Mat zero = oracle::zeros(5, 5);
  Tape t;
  const auto ch = bind_channel(t, {zero, zero, zero}, {zero, zero, zero}, 5);
  const Mat x = oracle::random_normal(rng, 8, 5);
  const Var y = stsc_forward(t, ch, g, t.constant(oracle::to_tensor(x)), Ablation::kFull, 1e-5);
  const Mat ref = oracle::layer_norm(x, std::vector<double>(5, 1.0), std::vector<double>(5, 0.0), 1e-5);
  EXPECT_LE(oracle::max_abs_diff(oracle::from_tensor(t.value(y)), ref), 1e-12);
}

TEST(Stsc, MatchesDenseTermByTermOracle) {
  std::mt19937_64 rng(2);
  for (Ablation a : {Ablation::kFull, Ablation::kNoHstg, Ablation::kNoTwoStep}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + trial % 4, m = 2 + trial % 3, K = 1 + trial % 3, d = 2 + trial % 3;
      const Mat w = random_symmetric_graph(rng, n);
      StGraphOptions o;
      o.hops = K;
      const auto g = build_hstg(graph_from(w), m, o);
      std::vector<Mat> nh, h;
      for (std::size_t k = 0; k < K; ++k) {
        if (a != Ablation::kNoTwoStep) nh.push_back(oracle::random_normal(rng, d, d));
        if (a != Ablation::kNoHstg) h.push_back(oracle::random_normal(rng, d, d));
      }
      // Two stacked windows exercise the per-block propagation.
      const Mat x0 = oracle::random_normal(rng, m * n, d);
      const Mat x1 = oracle::random_normal(rng, m * n, d);
      Mat x = x0;
      x.insert(x.end(), x1.begin(), x1.end());
      Tape t;
      const auto ch = bind_channel(t, nh, h, d);
      const Mat y = oracle::from_tensor(
          t.value(stsc_forward(t, ch, g, t.constant(oracle::to_tensor(x)), a, 1e-5)));
      const auto tr = dense_transitions(w, m);
      const std::vector<double> one(d, 1.0), zero(d, 0.0);
      Mat ref = oracle::stsc(x0, tr.p_nh, tr.p_h, nh, h, one, zero, 1e-5);
      const Mat ref1 = oracle::stsc(x1, tr.p_nh, tr.p_h, nh, h, one, zero, 1e-5);
      ref.insert(ref.end(), ref1.begin(), ref1.end());
      EXPECT_LE(oracle::max_abs_diff(y, ref), 1e-10) << to_string(a) << " trial " << trial;
    }
  }
}

TEST(Stsc, NoHstgKeepsSnapshotsSeparate) {
  std::mt19937_64 rng(3);
  const Mat w = random_symmetric_graph(rng, 3);
  StGraphOptions o;
  o.hops = 2;
  const auto g = build_hstg(graph_from(w), 3, o);
  const std::vector<Mat> nh{oracle::random_normal(rng, 2, 2), oracle::random_normal(rng, 2, 2)};
  Mat x = oracle::random_normal(rng, 9, 2);
  auto run = [&](const Mat& in) {
    Tape t;
    const auto ch = bind_channel(t, nh, {}, 2);
    return oracle::from_tensor(
        t.value(stsc_forward(t, ch, g, t.constant(oracle::to_tensor(in)), Ablation::kNoHstg, 1e-5)));
  };
  const Mat before = run(x);
  for (std::size_t i = 6; i < 9; ++i) x[i][0] += 1.0;  // perturb snapshot 2 only
  const Mat after = run(x);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(before[r], after[r]);
  EXPECT_NE(before[7], after[7]);
}

TEST(Encoder, IterationCountsExhaustive) {
  for (std::size_t T = 2; T <= 24; ++T) {
    for (std::size_t m = 2; m <= T; ++m) {
      const auto expected = static_cast<std::size_t>(
          1 + std::ceil(static_cast<double>(T - m) / static_cast<double>(m - 1)));
      EXPECT_EQ(encode_iteration_count(T, m), expected) << "T=" << T << " m=" << m;
      const auto steps = encode_schedule(T, m);
      ASSERT_EQ(steps.size(), expected);
      std::size_t next = 0;
      for (std::size_t i = 0; i < steps.size(); ++i) {
        EXPECT_EQ(steps[i].with_compressed, i > 0);
        EXPECT_EQ(steps[i].first_raw, next);
        EXPECT_LE(steps[i].snapshots(), m);
        EXPECT_GE(steps[i].snapshots(), 2u);
        next += steps[i].raw_count;
      }
      EXPECT_EQ(next, T);
    }
  }
  EXPECT_EQ(encode_iteration_count(12, 2), 11u);
  EXPECT_EQ(encode_iteration_count(12, 12), 1u);
}

TEST(Encoder, ScheduleSevenByThree) {
  const auto steps = encode_schedule(7, 3);
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_FALSE(steps[0].with_compressed);
  EXPECT_EQ(steps[0].first_raw, 0u);
  EXPECT_EQ(steps[0].raw_count, 3u);
  EXPECT_EQ(steps[1].first_raw, 3u);
  EXPECT_EQ(steps[1].raw_count, 2u);
  EXPECT_EQ(steps[2].first_raw, 5u);
  EXPECT_EQ(steps[2].raw_count, 2u);
  EXPECT_THROW(encode_schedule(7, 1), ArgumentError);
  EXPECT_THROW(encode_schedule(2, 3), ArgumentError);
}

TEST(Config, ResolvedDefaults) {
  ModelConfig c;
  c.ablation = Ablation::kNoIteration;
  const auto r = c.resolved();
  EXPECT_EQ(r.m, r.T);
  EXPECT_EQ(r.decoder_hidden, r.d);
  c = ModelConfig{};
  c.m = 1;
  EXPECT_THROW(c.resolved(), ArgumentError);
  c.m = 13;
  EXPECT_THROW(c.resolved(), ArgumentError);
  EXPECT_EQ(parse_ablation("no_two_step"), Ablation::kNoTwoStep);
  EXPECT_EQ(to_string(Ablation::kNoIteration), "no_iteration");
  EXPECT_THROW(parse_ablation("none"), ArgumentError);
}

TEST(Model, ParameterCountMatchesLayout) {
  std::mt19937_64 rng(4);
  const auto g = graph_from(random_symmetric_graph(rng, 4));
  const auto count = [](const ModelConfig& c, std::size_t terms) {
    const std::size_t hid = c.decoder_hidden ? c.decoder_hidden : c.d;
    return c.d_in * c.d + c.s * (terms * c.K * c.d * c.d + 2 * c.d + c.m * c.d) + c.s * c.d * c.d +
           c.d * hid + hid + hid * c.H * c.d_out + c.H * c.d_out;
  };
  for (Ablation a : {Ablation::kFull, Ablation::kNoHstg, Ablation::kNoTwoStep}) {
    const auto c = tiny_config(a);
    const IstdGcnModel model(g, c);
    EXPECT_EQ(model.parameter_count(), count(c, a == Ablation::kFull ? 2 : 1));
  }
}

TEST(Model, PredictMatchesDenseReferenceForward) {
  std::mt19937_64 rng(5);
  for (Ablation a : {Ablation::kFull, Ablation::kNoHstg, Ablation::kNoTwoStep, Ablation::kNoIteration}) {
    const Mat w = random_symmetric_graph(rng, 4);
    IstdGcnModel model(graph_from(w), tiny_config(a));
    // Random LayerNorm affine and compress kernels so every parameter matters.
    for (ParamArray* p : model.params()) {
      for (double& v : p->value.values()) v = std::normal_distribution<double>(0.0, 0.5)(rng);
    }
    const auto window = random_tensor(rng, {7, 4, 1});
    const auto pred = model.predict(window);
    ASSERT_EQ(pred.shape(), (Shape{2, 4, 1}));
    EXPECT_LE(oracle::max_abs_diff(oracle::from_tensor(pred.reshaped({2, 4})),
                                   reference_forward(model, w, window)),
              1e-10)
        << to_string(a);
  }
}

TEST(Model, MultiChannelSingleAndIdenticalChannels) {
  std::mt19937_64 rng(6);
  const Mat w = random_symmetric_graph(rng, 3);
  auto c = tiny_config();
  c.s = 1;
  IstdGcnModel one(graph_from(w), c);
  c.s = 2;
  IstdGcnModel two(graph_from(w), c);
  // Copy channel 0 of `one` into both channels of `two`; split the mix evenly.
  for (std::size_t ch = 0; ch < 2; ++ch) {
    auto& dst = two.channel(ch);
    const auto& src = one.channel(0);
    for (std::size_t k = 0; k < c.K; ++k) {
      dst.theta_nh[k].value = src.theta_nh[k].value;
      dst.theta_h[k].value = src.theta_h[k].value;
    }
    dst.ln_scale.value = src.ln_scale.value;
    dst.ln_shift.value = src.ln_shift.value;
    dst.compress_kernel.value = src.compress_kernel.value;
  }
  for (std::size_t r = 0; r < c.d; ++r) {
    for (std::size_t col = 0; col < c.d; ++col) {
      const double v = one.mix().value.at(r, col) / 2.0;
      two.mix().value.at(r, col) = v;
      two.mix().value.at(r + c.d, col) = v;
    }
  }
  const auto x = random_tensor(rng, {3 * 3, c.d});
  Tape t1, t2;
  const auto v1 = one.bind_frozen(t1);
  const auto v2 = two.bind_frozen(t2);
  const auto y1 = t1.value(one.multi_channel_forward(t1, v1, t1.constant(x), 3));
  const auto y2 = t2.value(two.multi_channel_forward(t2, v2, t2.constant(x), 3));
  EXPECT_LE(max_abs_diff(y1, y2), 1e-12);

  // s = 1 is mix(compress(stsc(x))).
  Tape t3;
  const auto v3 = one.bind_frozen(t3);
  const Var h = stsc_forward(t3, v3.channels[0], one.block_graph(3), t3.constant(x), Ablation::kFull, 1e-5);
  const Var z = ops::linear(t3, ops::temporal_compress(t3, h, v3.channels[0].compress_kernel, 3), v3.mix);
  EXPECT_EQ(t3.value(z), y1);
}

TEST(Model, ZeroDecoderOutputsZero) {
  std::mt19937_64 rng(7);
  IstdGcnModel model(graph_from(random_symmetric_graph(rng, 5)), tiny_config());
  model.decoder_w2().value.fill(0.0);
  model.decoder_b2().value.fill(0.0);
  const auto pred = model.predict(random_tensor(rng, {3, 7, 5, 1}));
  EXPECT_EQ(pred, DenseTensor({3, 2, 5, 1}));
}

TEST(Model, SensorPermutationEquivariance) {
  std::mt19937_64 rng(8);
  const std::size_t n = 6;
  const Mat w = random_symmetric_graph(rng, n);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Mat wp = oracle::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) wp[i][j] = w[perm[i]][perm[j]];
  }
  const IstdGcnModel a(graph_from(w), tiny_config());
  const IstdGcnModel b(graph_from(wp), tiny_config());
  const auto x = random_tensor(rng, {7, n, 1});
  DenseTensor xp({7, n, 1});
  for (std::size_t t = 0; t < 7; ++t) {
    for (std::size_t i = 0; i < n; ++i) xp[t * n + i] = x[t * n + perm[i]];
  }
  const auto ya = a.predict(x);
  const auto yb = b.predict(xp);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(yb[h * n + i], ya[h * n + perm[i]], 1e-10);
  }
}

TEST(Model, DeterministicInitAndPredict) {
  std::mt19937_64 rng(9);
  const auto g = graph_from(random_symmetric_graph(rng, 4));
  const IstdGcnModel a(g, tiny_config());
  const IstdGcnModel b(g, tiny_config());
  auto c = tiny_config();
  c.init_seed = 6;
  const IstdGcnModel other(g, c);
  const auto x = random_tensor(rng, {2, 7, 4, 1});
  EXPECT_EQ(a.predict(x), b.predict(x));
  EXPECT_NE(a.predict(x), other.predict(x));
  // Batched and single-window inference agree.
  const auto single = a.predict(DenseTensor({7, 4, 1}, std::vector<double>(x.data(), x.data() + 28)));
  for (std::size_t e = 0; e < single.size(); ++e) EXPECT_EQ(single[e], a.predict(x)[e]);
  EXPECT_THROW(a.predict(DenseTensor({6, 4, 1})), ShapeError);
}

TEST(Model, EncodeWindowCoversAllSnapshots) {
  std::mt19937_64 rng(10);
  const IstdGcnModel model(graph_from(random_symmetric_graph(rng, 3)), tiny_config());
  const auto enc = model.encode_window(random_tensor(rng, {7, 3, 1}));
  EXPECT_EQ(enc.features.shape(), (Shape{3, 3}));
  EXPECT_EQ(enc.first, 0u);
  EXPECT_EQ(enc.last, 6u);
}

TEST(Model, TinyGradientCheck) {
  std::mt19937_64 rng(11);
  auto c = tiny_config();
  c.T = 5;
  c.m = 2;
  IstdGcnModel model(graph_from(random_symmetric_graph(rng, 4)), c);
  const auto input = random_tensor(rng, {2, 5, 4, 1});
  const auto target = random_tensor(rng, {2, 2, 4, 1});
  auto loss = [&](bool with_grad) {
    Tape t;
    const auto vars = model.bind(t);
    const Var pred = model.forward(t, vars, t.constant(input));
    const Var l = ops::mae_l2_loss(t, pred, target, vars.all, 1e-3);
    if (with_grad) t.backward(l);
    return t.value(l)[0];
  };
  EXPECT_LE(oracle::max_fd_rel_error(model.params(), loss), 1e-4);
}

}  // namespace
}  // namespace stdiff
