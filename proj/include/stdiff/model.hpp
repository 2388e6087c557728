// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stdiff/graph.hpp"
#include "stdiff/ops.hpp"
#include "stdiff/stgraph.hpp"
#include "stdiff/tape.hpp"
#include "stdiff/tensor.hpp"

namespace stdiff {

enum class Ablation {
  kFull,
  kNoHstg,       // drop the spatial-temporal (HSTG) term
  kNoTwoStep,    // drop the snapshot-local (NHSTG) term
  kNoIteration,  // one pass over all T snapshots (m = T)
};

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);
std::string to_string(TemporalDirection d);
TemporalDirection parse_temporal_direction(const std::string& s);

struct ModelConfig {
  std::size_t K = 5;   // diffusion hops per block
  std::size_t m = 2;   // snapshots joined per iteration
  std::size_t s = 8;   // channels
  std::size_t d = 256; // hidden width
  std::size_t T = 12;  // history length
  std::size_t H = 12;  // horizons
  std::size_t d_in = 1;
  std::size_t d_out = 1;
  std::size_t decoder_hidden = 0;  // 0 means d
  Ablation ablation = Ablation::kFull;
  TemporalDirection temporal_direction = TemporalDirection::kAsWritten;
  bool self_loops = true;
  double ln_eps = 1e-5;
  std::uint64_t init_seed = 0;

  /// All defaults materialised: m = T under kNoIteration, decoder width set.
  /// Throws ArgumentError on inconsistent values.
  ModelConfig resolved() const;
};

/// Number of encoder iterations: 1 + ceil((T - m) / (m - 1)).
std::size_t encode_iteration_count(std::size_t T, std::size_t m);

/// One encoder step: the compressed snapshot (absent on the first step)
/// followed by `raw_count` raw snapshots starting at `first_raw`.
struct EncodeStep {
  bool with_compressed = false;
  std::size_t first_raw = 0;
  std::size_t raw_count = 0;
  std::size_t snapshots() const { return raw_count + (with_compressed ? 1 : 0); }
};
std::vector<EncodeStep> encode_schedule(std::size_t T, std::size_t m);

struct StscChannelParams {
  std::vector<ParamArray> theta_nh;  // K x [d, d], empty under kNoTwoStep
  std::vector<ParamArray> theta_h;   // K x [d, d], empty under kNoHstg
  ParamArray ln_scale;               // [d]
  ParamArray ln_shift;               // [d]
  ParamArray compress_kernel;        // [m, d]
};

/// Tape handles for one channel's parameters.
struct ChannelVars {
  std::vector<Var> theta_nh;
  std::vector<Var> theta_h;
  Var ln_scale;
  Var ln_shift;
  Var compress_kernel;
};

struct ModelVars {
  Var input_embed;
  std::vector<ChannelVars> channels;
  Var mix;
  ops::MlpDecoderVars decoder;
  std::vector<Var> all;
};

/// LN(sum_k [(P_NH^k X) Theta_k1 + (P_H^k X) Theta_k2] + X) on stacked rows
/// X of shape [batch * m * n, d]; the ablation drops one of the two terms.
Var stsc_forward(Tape& tape, const ChannelVars& channel, const StBlockGraph& graph, Var x,
                 Ablation ablation, double ln_eps);

struct CompressedSnapshot {
  DenseTensor features;  // [n, d]
  std::size_t first = 0; // source snapshot range [first, last]
  std::size_t last = 0;
};

class IstdGcnModel {
 public:
  IstdGcnModel(SensorGraph graph, const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const SensorGraph& graph() const { return graph_; }
  std::size_t n() const { return graph_.n(); }
  /// Block graph over `snapshots` snapshots (the full m or a shorter tail).
  const StBlockGraph& block_graph(std::size_t snapshots) const;

  std::vector<ParamArray*> params();
  std::vector<const ParamArray*> params() const;
  std::size_t parameter_count() const;
  void init_params(std::uint64_t seed);
  void zero_grad();

  StscChannelParams& channel(std::size_t c) { return channels_.at(c); }
  ParamArray& mix() { return mix_; }
  ParamArray& input_embed() { return input_embed_; }
  ParamArray& decoder_w2() { return dec_w2_; }
  ParamArray& decoder_b2() { return dec_b2_; }

  /// Parameters as trainable leaves.
  ModelVars bind(Tape& tape);
  /// Parameters as constants (inference only).
  ModelVars bind_frozen(Tape& tape) const;

  /// s channels of stsc_forward + temporal_compress, concatenated and mixed.
  /// x is [batch * snapshots * n, d]; result is [batch * n, d].
  Var multi_channel_forward(Tape& tape, const ModelVars& vars, Var x, std::size_t snapshots) const;

  /// Iterative encoder over embedded input [batch * T * n, d]. Returns the
  /// final compressed snapshot rows [batch * n, d].
  Var encode(Tape& tape, const ModelVars& vars, Var embedded, std::size_t batch,
             std::size_t* iterations = nullptr) const;

  /// Differentiable forward: input [batch, T, n, d_in] -> [batch, H, n, d_out].
  Var forward(Tape& tape, const ModelVars& vars, Var input) const;

  /// Inference on one window [T, n, d_in] -> [H, n, d_out], or a batch
  /// [B, T, n, d_in] -> [B, H, n, d_out].
  DenseTensor predict(const DenseTensor& window) const;
  /// Encoder output for one window.
  CompressedSnapshot encode_window(const DenseTensor& window) const;

 private:
  template <typename Binder>
  ModelVars bind_with(Tape& tape, Binder&& leaf) const;

  ModelConfig config_;
  SensorGraph graph_;
  std::map<std::size_t, StBlockGraph> block_graphs_;
  ParamArray input_embed_;
  std::vector<StscChannelParams> channels_;
  ParamArray mix_;
  ParamArray dec_w1_;
  ParamArray dec_b1_;
  ParamArray dec_w2_;
  ParamArray dec_b2_;
};

}  // namespace stdiff
