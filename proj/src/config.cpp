// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/config.hpp"

#include <sstream>

#include "csv.hpp"
#include "stdiff/errors.hpp"

namespace stdiff {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw FormatError("config key '" + key + "' has the wrong type");
  }
}

std::size_t count_field(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw FormatError("config key '" + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return json{{"K", c.K},
              {"m", c.m},
              {"s", c.s},
              {"d", c.d},
              {"T", c.T},
              {"H", c.H},
              {"d_in", c.d_in},
              {"d_out", c.d_out},
              {"decoder_hidden", c.decoder_hidden},
              {"ablation", to_string(c.ablation)},
              {"temporal_direction", to_string(c.temporal_direction)},
              {"self_loops", c.self_loops},
              {"ln_eps", c.ln_eps},
              {"init_seed", c.init_seed}};
}

nlohmann::json to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"l2_lambda", c.l2_lambda},
              {"l2_squared", c.l2_squared},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"early_stop_patience", c.early_stop_patience},
              {"seed", c.seed},
              {"shuffle", c.shuffle},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"adam_eps", c.adam.eps}};
}

nlohmann::json to_json(const RunConfig& c) {
  json j = to_json(c.model);
  j["train"] = to_json(c.train);
  j["stride"] = c.stride;
  j["n"] = c.gradcheck_n;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("model config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "K") c.K = count_field(v, key);
    else if (key == "m") c.m = count_field(v, key);
    else if (key == "s") c.s = count_field(v, key);
    else if (key == "d") c.d = count_field(v, key);
    else if (key == "T") c.T = count_field(v, key);
    else if (key == "H") c.H = count_field(v, key);
    else if (key == "d_in") c.d_in = count_field(v, key);
    else if (key == "d_out") c.d_out = count_field(v, key);
    else if (key == "decoder_hidden") c.decoder_hidden = count_field(v, key);
    else if (key == "ablation") c.ablation = parse_ablation(field<std::string>(v, key));
    else if (key == "temporal_direction") c.temporal_direction = parse_temporal_direction(field<std::string>(v, key));
    else if (key == "self_loops") c.self_loops = field<bool>(v, key);
    else if (key == "ln_eps") c.ln_eps = field<double>(v, key);
    else if (key == "init_seed") c.init_seed = field<std::uint64_t>(v, key);
    else throw FormatError("unknown model config key '" + key + "'");
  }
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "learning_rate") c.learning_rate = field<double>(v, key);
    else if (key == "l2_lambda") c.l2_lambda = field<double>(v, key);
    else if (key == "l2_squared") c.l2_squared = field<bool>(v, key);
    else if (key == "epochs") c.epochs = count_field(v, key);
    else if (key == "batch_size") c.batch_size = count_field(v, key);
    else if (key == "early_stop_patience") c.early_stop_patience = count_field(v, key);
    else if (key == "seed") c.seed = field<std::uint64_t>(v, key);
    else if (key == "shuffle") c.shuffle = field<bool>(v, key);
    else if (key == "beta1") c.adam.beta1 = field<double>(v, key);
    else if (key == "beta2") c.adam.beta2 = field<double>(v, key);
    else if (key == "adam_eps") c.adam.eps = field<double>(v, key);
    else throw FormatError("unknown train config key '" + key + "'");
  }
  return c;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  RunConfig c;
  json model = json::object();
  for (const auto& [key, v] : j.items()) {
    if (key == "train") c.train = train_config_from_json(v);
    else if (key == "stride") c.stride = count_field(v, key);
    else if (key == "n") c.gradcheck_n = count_field(v, key);
    else model[key] = v;
  }
  c.model = model_config_from_json(model);
  if (c.stride == 0) throw FormatError("config key 'stride' must be >= 1");
  return c;
}

RunConfig read_run_config(const std::string& path) {
  auto in = csv::open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace stdiff
