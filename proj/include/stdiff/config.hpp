// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "stdiff/model.hpp"
#include "stdiff/training.hpp"

namespace stdiff {

/// Everything a config file can set.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t stride = 1;       // window stride
  std::size_t gradcheck_n = 5;  // vertex count of the gradient-check graph
};

// Model keys: K, m, s, d, T, H, ablation, temporal_direction, self_loops and
// optionally d_in, d_out, decoder_hidden, ln_eps, init_seed. A nested "train"
// object holds TrainConfig fields; "stride" and "n" sit at the top level.
// Unknown keys throw FormatError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig read_run_config(const std::string& path);

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const RunConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace stdiff
