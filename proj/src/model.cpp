// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "stdiff/errors.hpp"

namespace stdiff {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoHstg: return "no_hstg";
    case Ablation::kNoTwoStep: return "no_two_step";
    case Ablation::kNoIteration: return "no_iteration";
  }
  return "full";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "no_hstg") return Ablation::kNoHstg;
  if (s == "no_two_step") return Ablation::kNoTwoStep;
  if (s == "no_iteration") return Ablation::kNoIteration;
  throw ArgumentError("unknown ablation '" + s +
                      "' (expected full, no_hstg, no_two_step or no_iteration)");
}

std::string to_string(TemporalDirection d) {
  return d == TemporalDirection::kTransposed ? "transposed" : "as_written";
}

TemporalDirection parse_temporal_direction(const std::string& s) {
  if (s == "as_written") return TemporalDirection::kAsWritten;
  if (s == "transposed") return TemporalDirection::kTransposed;
  throw ArgumentError("unknown temporal_direction '" + s + "' (expected as_written or transposed)");
}

ModelConfig ModelConfig::resolved() const {
  ModelConfig c = *this;
  if (c.ablation == Ablation::kNoIteration) c.m = c.T;
  if (c.decoder_hidden == 0) c.decoder_hidden = c.d;
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ArgumentError(std::string(name) + " must be >= 1");
  };
  positive(c.K, "K");
  positive(c.s, "s");
  positive(c.d, "d");
  positive(c.T, "T");
  positive(c.H, "H");
  positive(c.d_in, "d_in");
  positive(c.d_out, "d_out");
  if (c.m < 2) throw ArgumentError("m must be >= 2");
  if (c.T < c.m) {
    throw ArgumentError("T=" + std::to_string(c.T) + " is shorter than m=" + std::to_string(c.m));
  }
  if (!(c.ln_eps >= 0.0) || !std::isfinite(c.ln_eps)) throw ArgumentError("ln_eps must be >= 0");
  return c;
}

std::size_t encode_iteration_count(std::size_t T, std::size_t m) {
  if (m < 2) throw ArgumentError("m must be >= 2");
  if (T < m) throw ArgumentError("T must be >= m");
  return 1 + (T - m + m - 2) / (m - 1);
}

std::vector<EncodeStep> encode_schedule(std::size_t T, std::size_t m) {
  if (m < 2) throw ArgumentError("m must be >= 2");
  if (T < m) throw ArgumentError("T must be >= m");
  std::vector<EncodeStep> steps{{false, 0, m}};
  for (std::size_t consumed = m; consumed < T;) {
    const std::size_t r = std::min(m - 1, T - consumed);
    steps.push_back({true, consumed, r});
    consumed += r;
  }
  return steps;
}

Var stsc_forward(Tape& tape, const ChannelVars& channel, const StBlockGraph& graph, Var x,
                 Ablation ablation, double ln_eps) {
  const bool use_nh = ablation != Ablation::kNoTwoStep;
  const bool use_h = ablation != Ablation::kNoHstg;
  const std::size_t K = use_nh ? channel.theta_nh.size() : channel.theta_h.size();
  if (K > graph.hops()) {
    throw ShapeError("stsc_forward: " + std::to_string(K) + " hops requested, graph caches " +
                     std::to_string(graph.hops()));
  }
  Var acc = x;
  for (std::size_t k = 1; k <= K; ++k) {
    if (use_nh) {
      const Var term = ops::linear(tape, ops::spmm(tape, graph.nhstg_power(k), x),
                                   channel.theta_nh.at(k - 1));
      acc = ops::add(tape, acc, term);
    }
    if (use_h) {
      const Var term = ops::linear(tape, ops::spmm(tape, graph.hstg_power(k), x),
                                   channel.theta_h.at(k - 1));
      acc = ops::add(tape, acc, term);
    }
  }
  return ops::layer_norm(tape, acc, channel.ln_scale, channel.ln_shift, ln_eps);
}

IstdGcnModel::IstdGcnModel(SensorGraph graph, const ModelConfig& config)
    : config_(config.resolved()), graph_(std::move(graph)) {
  if (graph_.n() == 0) throw ArgumentError("model needs a non-empty graph");
  const ModelConfig& c = config_;

  StGraphOptions opts;
  opts.self_loops = c.self_loops;
  opts.direction = c.temporal_direction;
  opts.hops = c.K;
  for (const EncodeStep& step : encode_schedule(c.T, c.m)) {
    const std::size_t snapshots = step.snapshots();
    if (!block_graphs_.count(snapshots)) {
      block_graphs_.emplace(snapshots, build_hstg(graph_, snapshots, opts));
    }
  }

  const std::size_t d = c.d;
  input_embed_ = ParamArray("input_embed", DenseTensor({c.d_in, d}));
  channels_.resize(c.s);
  for (std::size_t ch = 0; ch < c.s; ++ch) {
    StscChannelParams& p = channels_[ch];
    const std::string prefix = "channel" + std::to_string(ch) + ".";
    for (std::size_t k = 1; k <= c.K; ++k) {
      if (c.ablation != Ablation::kNoTwoStep) {
        p.theta_nh.emplace_back(prefix + "theta_nh." + std::to_string(k), DenseTensor({d, d}));
      }
      if (c.ablation != Ablation::kNoHstg) {
        p.theta_h.emplace_back(prefix + "theta_h." + std::to_string(k), DenseTensor({d, d}));
      }
    }
    p.ln_scale = ParamArray(prefix + "ln_scale", DenseTensor({d}));
    p.ln_shift = ParamArray(prefix + "ln_shift", DenseTensor({d}));
    p.compress_kernel = ParamArray(prefix + "compress", DenseTensor({c.m, d}));
  }
  mix_ = ParamArray("mix", DenseTensor({c.s * d, d}));
  dec_w1_ = ParamArray("decoder.w1", DenseTensor({d, c.decoder_hidden}));
  dec_b1_ = ParamArray("decoder.b1", DenseTensor({c.decoder_hidden}));
  dec_w2_ = ParamArray("decoder.w2", DenseTensor({c.decoder_hidden, c.H * c.d_out}));
  dec_b2_ = ParamArray("decoder.b2", DenseTensor({c.H * c.d_out}));
  init_params(c.init_seed);
}

const StBlockGraph& IstdGcnModel::block_graph(std::size_t snapshots) const {
  const auto it = block_graphs_.find(snapshots);
  if (it == block_graphs_.end()) {
    throw ArgumentError("no block graph over " + std::to_string(snapshots) + " snapshots");
  }
  return it->second;
}

std::vector<ParamArray*> IstdGcnModel::params() {
  std::vector<ParamArray*> out{&input_embed_};
  for (auto& ch : channels_) {
    for (auto& p : ch.theta_nh) out.push_back(&p);
    for (auto& p : ch.theta_h) out.push_back(&p);
    out.push_back(&ch.ln_scale);
    out.push_back(&ch.ln_shift);
    out.push_back(&ch.compress_kernel);
  }
  for (ParamArray* p : {&mix_, &dec_w1_, &dec_b1_, &dec_w2_, &dec_b2_}) out.push_back(p);
  return out;
}

std::vector<const ParamArray*> IstdGcnModel::params() const {
  std::vector<const ParamArray*> out;
  for (ParamArray* p : const_cast<IstdGcnModel*>(this)->params()) out.push_back(p);
  return out;
}

std::size_t IstdGcnModel::parameter_count() const {
  std::size_t total = 0;
  for (const ParamArray* p : params()) total += p->value.size();
  return total;
}

void IstdGcnModel::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto glorot = [&rng](ParamArray& p) {
    const double a = std::sqrt(6.0 / static_cast<double>(p.value.dim(0) + p.value.dim(1)));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& v : p.value.values()) v = u(rng);
  };
  glorot(input_embed_);
  for (auto& ch : channels_) {
    for (auto& p : ch.theta_nh) glorot(p);
    for (auto& p : ch.theta_h) glorot(p);
    ch.ln_scale.value.fill(1.0);
    ch.ln_shift.value.fill(0.0);
    ch.compress_kernel.value.fill(1.0 / static_cast<double>(config_.m));
  }
  glorot(mix_);
  glorot(dec_w1_);
  dec_b1_.value.fill(0.0);
  glorot(dec_w2_);
  dec_b2_.value.fill(0.0);
  zero_grad();
}

void IstdGcnModel::zero_grad() {
  for (ParamArray* p : params()) p->zero_grad();
}

template <typename Binder>
ModelVars IstdGcnModel::bind_with(Tape& tape, Binder&& leaf) const {
  ModelVars v;
  auto take = [&](const ParamArray& p) {
    const Var var = leaf(tape, p);
    v.all.push_back(var);
    return var;
  };
  v.input_embed = take(input_embed_);
  for (const auto& ch : channels_) {
    ChannelVars cv;
    for (const auto& p : ch.theta_nh) cv.theta_nh.push_back(take(p));
    for (const auto& p : ch.theta_h) cv.theta_h.push_back(take(p));
    cv.ln_scale = take(ch.ln_scale);
    cv.ln_shift = take(ch.ln_shift);
    cv.compress_kernel = take(ch.compress_kernel);
    v.channels.push_back(std::move(cv));
  }
  v.mix = take(mix_);
  v.decoder.w1 = take(dec_w1_);
  v.decoder.b1 = take(dec_b1_);
  v.decoder.w2 = take(dec_w2_);
  v.decoder.b2 = take(dec_b2_);
  return v;
}

ModelVars IstdGcnModel::bind(Tape& tape) {
  return bind_with(tape, [](Tape& t, const ParamArray& p) {
    return t.param(const_cast<ParamArray&>(p));
  });
}

ModelVars IstdGcnModel::bind_frozen(Tape& tape) const {
  return bind_with(tape, [](Tape& t, const ParamArray& p) { return t.constant(p.value); });
}

Var IstdGcnModel::multi_channel_forward(Tape& tape, const ModelVars& vars, Var x,
                                        std::size_t snapshots) const {
  const StBlockGraph& g = block_graph(snapshots);
  std::vector<Var> outs;
  outs.reserve(vars.channels.size());
  for (const ChannelVars& ch : vars.channels) {
    const Var h = stsc_forward(tape, ch, g, x, config_.ablation, config_.ln_eps);
    Var kernel = ch.compress_kernel;
    if (snapshots < config_.m) kernel = ops::slice_rows(tape, kernel, 0, snapshots);
    outs.push_back(ops::temporal_compress(tape, h, kernel, n()));
  }
  const Var joined = outs.size() == 1 ? outs.front() : ops::concat_features(tape, outs);
  return ops::linear(tape, joined, vars.mix);
}

Var IstdGcnModel::encode(Tape& tape, const ModelVars& vars, Var embedded, std::size_t batch,
                         std::size_t* iterations) const {
  const std::size_t T = config_.T;
  const std::size_t nn = n();
  const std::size_t d = config_.d;
  if (tape.value(embedded).size() != batch * T * nn * d) {
    throw ShapeError("encode: embedded input " + shape_to_string(tape.value(embedded).shape()) +
                     " is not [" + std::to_string(batch) + " * " + std::to_string(T) + " * " +
                     std::to_string(nn) + ", " + std::to_string(d) + "]");
  }
  const auto steps = encode_schedule(T, config_.m);
  Var compressed{};
  for (const EncodeStep& step : steps) {
    const std::size_t snaps = step.snapshots();
    std::vector<std::size_t> index;
    index.reserve(batch * snaps * nn);
    // Source rows: compressed rows [0, batch * n) then the embedded input.
    const std::size_t raw_base = step.with_compressed ? batch * nn : 0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (step.with_compressed) {
        for (std::size_t i = 0; i < nn; ++i) index.push_back(b * nn + i);
      }
      for (std::size_t t = 0; t < step.raw_count; ++t) {
        const std::size_t row0 = raw_base + (b * T + step.first_raw + t) * nn;
        for (std::size_t i = 0; i < nn; ++i) index.push_back(row0 + i);
      }
    }
    Var source = embedded;
    if (step.with_compressed) {
      const Var parts[] = {compressed, embedded};
      source = ops::concat_rows(tape, parts);
    }
    const Var x = ops::gather_rows(tape, source, std::move(index), {batch * snaps * nn, d});
    compressed = multi_channel_forward(tape, vars, x, snaps);
  }
  if (iterations) *iterations = steps.size();
  return compressed;
}

Var IstdGcnModel::forward(Tape& tape, const ModelVars& vars, Var input) const {
  const DenseTensor& iv = tape.value(input);
  const ModelConfig& c = config_;
  if (iv.rank() != 4 || iv.dim(1) != c.T || iv.dim(2) != n() || iv.dim(3) != c.d_in) {
    throw ShapeError("forward: input " + shape_to_string(iv.shape()) + " is not [B, " +
                     std::to_string(c.T) + ", " + std::to_string(n()) + ", " +
                     std::to_string(c.d_in) + "]");
  }
  const std::size_t batch = iv.dim(0);
  const Var flat = ops::gather_rows(tape, input, [&] {
    std::vector<std::size_t> idx(batch * c.T * n());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }(), {batch * c.T * n(), c.d_in});
  const Var embedded = ops::linear(tape, flat, vars.input_embed);
  const Var encoded = encode(tape, vars, embedded, batch);
  std::vector<std::size_t> idx(batch * n());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Var shaped = ops::gather_rows(tape, encoded, std::move(idx), {batch, n(), c.d});
  return ops::mlp_decode(tape, shaped, vars.decoder, c.H, c.d_out);
}

DenseTensor IstdGcnModel::predict(const DenseTensor& window) const {
  const bool single = window.rank() == 3;
  DenseTensor input = window;
  if (single) {
    Shape s = window.shape();
    s.insert(s.begin(), 1);
    input = window.reshaped(s);
  }
  Tape tape;
  const ModelVars vars = bind_frozen(tape);
  const Var out = forward(tape, vars, tape.constant(std::move(input)));
  DenseTensor y = tape.value(out);
  if (single) {
    Shape s = y.shape();
    s.erase(s.begin());
    y = y.reshaped(s);
  }
  return y;
}

CompressedSnapshot IstdGcnModel::encode_window(const DenseTensor& window) const {
  const ModelConfig& c = config_;
  if (window.rank() != 3 || window.dim(0) != c.T || window.dim(1) != n() ||
      window.dim(2) != c.d_in) {
    throw ShapeError("encode_window: window " + shape_to_string(window.shape()) + " is not [" +
                     std::to_string(c.T) + ", " + std::to_string(n()) + ", " +
                     std::to_string(c.d_in) + "]");
  }
  Tape tape;
  const ModelVars vars = bind_frozen(tape);
  const Var x = tape.constant(window.reshaped({c.T * n(), c.d_in}));
  const Var encoded = encode(tape, vars, ops::linear(tape, x, vars.input_embed), 1);
  return {tape.value(encoded), 0, c.T - 1};
}

}  // namespace stdiff
