// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stdiff/checkpoint.hpp"
#include "stdiff/config.hpp"
#include "stdiff/data.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/gradcheck.hpp"
#include "stdiff/graph.hpp"
#include "stdiff/metrics.hpp"
#include "stdiff/model.hpp"
#include "stdiff/ops.hpp"
#include "stdiff/training.hpp"

namespace stdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_sha1(const std::string& bytes) {
  const std::string payload = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw NumericError("SHA-1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string file_git_sha1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return git_blob_sha1(ss.str());
}

namespace {

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw FormatError("no such file: " + path);
}

json input_entry(const std::string& path) {
  return json{{"path", path}, {"git_sha1", file_git_sha1(path)}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("failed writing " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

json manifest(const std::string& command, const json& config, std::uint64_t seed,
              const json& inputs, const json& outputs) {
  return json{{"command", command}, {"config", config}, {"seed", seed},
              {"inputs", inputs}, {"outputs", outputs}};
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void print_report(std::ostream& out, const std::string& title, const EvalReport& r) {
  out << title << '\n';
  out << "  horizon      MAE     RMSE   MAPE%\n";
  for (const auto& row : r.rows) {
    char buf[128];
    const std::string label =
        row.horizon == 0 ? "all" : std::to_string(row.horizon * r.interval_seconds / 60) + " min";
    std::snprintf(buf, sizeof buf, "  %-8s %8.4f %8.4f %7.3f\n", label.c_str(), row.mae, row.rmse,
                  row.mape_pct);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// build-adj

struct BuildAdjArgs {
  std::string distances, ids, out;
  std::optional<double> epsilon, quantile, sigma;
};

int cmd_build_adj(const BuildAdjArgs& a, std::ostream& out) {
  require_file(a.distances);
  require_file(a.ids);
  GaussianKernelOptions opts;
  if (a.epsilon) {
    opts.mode = ThresholdMode::kDistance;
    opts.threshold = *a.epsilon;
  } else if (a.quantile) {
    if (*a.quantile < 0.0 || *a.quantile > 1.0) throw ArgumentError("--quantile must lie in [0, 1]");
    opts.threshold = *a.quantile;
  }
  opts.sigma = a.sigma;
  json cfg{{"mode", opts.mode == ThresholdMode::kDistance ? "distance" : "weight_quantile"},
           {"threshold", opts.threshold}};
  if (opts.sigma) cfg["sigma"] = *opts.sigma;
  ensure_parent(a.out);
  write_json(a.out + ".manifest.json",
             manifest("build-adj", cfg, 0,
                      json{{"distances", input_entry(a.distances)}, {"ids", input_entry(a.ids)}},
                      json{{"edges", a.out + ".csv"}, {"sidecar", a.out + ".json"}}));
  const auto records = read_distance_csv(a.distances);
  const auto ids = read_id_list(a.ids);
  const SensorGraph g = build_gaussian_adjacency(records, ids, opts);
  write_adjacency(a.out, g);
  out << "wrote " << a.out << ".csv (" << g.n() << " sensors, " << g.adjacency().nnz()
      << " edges) and " << a.out << ".json\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data, adj, config, out, ablation, resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  require_file(a.data);
  require_file(a.config);
  require_file(a.adj + ".csv");
  require_file(a.adj + ".json");
  RunConfig rc = read_run_config(a.config);
  if (!a.ablation.empty()) rc.model.ablation = parse_ablation(a.ablation);
  if (a.seed) {
    rc.model.init_seed = *a.seed;
    rc.train.seed = *a.seed;
  }
  if (a.epochs) rc.train.epochs = *a.epochs;
  rc.model = rc.model.resolved();
  rc.train.validate();
  if (rc.model.d_in != 1 || rc.model.d_out != 1) {
    throw ArgumentError("speed data has one feature; d_in and d_out must be 1");
  }

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  const std::string best = (dir / "best.ckpt").string();
  const std::string state = (dir / "state.ckpt").string();
  const std::string log = (dir / "train_log.csv").string();
  const std::string model_json = (dir / "model.json").string();
  const std::string report = (dir / "test_report.csv").string();
  json inputs{{"data", input_entry(a.data)},
              {"adj_edges", input_entry(a.adj + ".csv")},
              {"adj_sidecar", input_entry(a.adj + ".json")},
              {"config", input_entry(a.config)}};
  if (!a.resume.empty()) inputs["resume"] = input_entry(a.resume);
  write_json((dir / "manifest.json").string(),
             manifest("train", to_json(rc), rc.train.seed, inputs,
                      json{{"best_checkpoint", best}, {"state", state}, {"log", log},
                           {"model", model_json}, {"adjacency", (dir / "adj").string()},
                           {"test_report", report}}));

  const SensorGraph graph = read_adjacency(a.adj);
  const SpeedSeries series = load_speed_csv(a.data);
  check_vertex_order(series, graph);
  write_adjacency((dir / "adj").string(), graph);
  const ForecastData data = prepare_forecast_data(series, rc.model.T, rc.model.H, rc.stride);
  write_json(model_json, json{{"model", to_json(rc.model)},
                              {"stride", rc.stride},
                              {"norm", {{"mean", data.stats.mean}, {"std", data.stats.std}}},
                              {"interval_seconds", series.interval()},
                              {"train_rows", data.train_rows}});
  out << "windows: train " << data.split.train.size() << ", val " << data.split.val.size()
      << ", test " << data.split.test.size() << " (split boundaries at windows "
      << data.split.val.front() << " and " << data.split.test.front() << ")\n";

  IstdGcnModel model(graph, rc.model);
  out << "model: " << model.parameter_count() << " parameters, ablation "
      << to_string(rc.model.ablation) << ", m=" << rc.model.m << "\n";
  TrainOutputs outputs;
  outputs.best_checkpoint = best;
  outputs.state_path = state;
  outputs.log_path = log;
  outputs.diagnostic_path = (dir / "nan_batch.json").string();
  outputs.resume_from = a.resume;
  outputs.on_epoch = [&out](const EpochLog& e) {
    out << "epoch " << e.epoch << "  train_loss " << fmt(e.train_loss) << "  val_mae "
        << fmt(e.val_mae) << "  val_rmse " << fmt(e.val_rmse) << "  val_mape "
        << fmt(e.val_mape, 2) << "%\n";
    out.flush();
  };
  const TrainReport tr = train(model, data, rc.train, outputs);
  out << "best epoch " << tr.best_epoch << " (val MAE " << fmt(tr.best_val_mae) << ")"
      << (tr.early_stopped ? ", stopped early" : "") << "\n";

  if (!data.split.test.empty()) {
    const EvalReport test = evaluate(model, data.normalized, data.raw, data.split.test, data.stats,
                                     default_report_horizons(), series.interval());
    write_report_csv(report, test);
    print_report(out, "test split:", test);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// shared loading for eval and predict

struct LoadedRun {
  IstdGcnModel model;
  NormStats stats;
  std::size_t stride = 1;
  SpeedSeries series;
};

LoadedRun load_run(const std::string& checkpoint, const std::string& data,
                   const std::string& adj_arg, const std::string& model_arg) {
  require_file(checkpoint);
  require_file(data);
  const fs::path run_dir = fs::path(checkpoint).parent_path();
  const std::string adj = adj_arg.empty() ? (run_dir / "adj").string() : adj_arg;
  const std::string model_path = model_arg.empty() ? (run_dir / "model.json").string() : model_arg;
  require_file(model_path);
  const json mj = read_json(model_path);
  if (!mj.contains("model") || !mj.contains("norm")) {
    throw FormatError(model_path + ": expected 'model' and 'norm' entries");
  }
  const ModelConfig mc = model_config_from_json(mj.at("model"));
  NormStats stats;
  try {
    stats.mean = mj.at("norm").at("mean").get<double>();
    stats.std = mj.at("norm").at("std").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(model_path + ": " + e.what());
  }
  const std::size_t stride = mj.value("stride", std::size_t{1});
  const SensorGraph graph = read_adjacency(adj);
  LoadedRun run{IstdGcnModel(graph, mc), stats, stride, load_speed_csv(data)};
  check_vertex_order(run.series, graph);
  auto params = run.model.params();
  restore(params, read_checkpoint(checkpoint));
  return run;
}

std::vector<std::size_t> select_windows(const SpeedSeries& series, std::size_t T, std::size_t H,
                                        std::size_t stride, const std::string& split) {
  const auto starts = window_starts(series.steps(), T, H, stride);
  if (split == "all") return starts;
  const DatasetSplit s = split_dataset(starts, 0.6, 0.2, (T + H - 1 + stride - 1) / stride);
  if (split == "train") return s.train;
  if (split == "val") return s.val;
  return s.test;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint, data, adj, model, out, split = "test", ha_mode = "weekly";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const std::string ha_out = sibling(a.out, "_ha.csv");
  ensure_parent(a.out);
  write_json(sibling(a.out, ".manifest.json"),
             manifest("eval", json{{"split", a.split}, {"ha_mode", a.ha_mode}}, 0,
                      json{{"checkpoint", input_entry(a.checkpoint)}, {"data", input_entry(a.data)}},
                      json{{"report", a.out}, {"ha_report", ha_out}}));
  const LoadedRun run = load_run(a.checkpoint, a.data, a.adj, a.model);
  const ModelConfig& mc = run.model.config();
  const auto starts = select_windows(run.series, mc.T, mc.H, run.stride, a.split);
  if (starts.empty()) throw DomainError("evaluation range '" + a.split + "' holds no windows");

  const DenseTensor normalized = zscore(run.series.values, run.stats);
  const EvalReport report = evaluate(run.model, normalized, run.series.values, starts, run.stats,
                                     default_report_horizons(), run.series.interval());
  write_report_csv(a.out, report);

  const auto all = window_starts(run.series.steps(), mc.T, mc.H, run.stride);
  const DatasetSplit split = split_dataset(all, 0.6, 0.2, (mc.T + mc.H - 1 + run.stride - 1) / run.stride);
  std::string warning;
  const HistoricalAverage ha =
      fit_historical_average(run.series, split.train.back() + mc.T + mc.H,
                             a.ha_mode == "global" ? HaMode::kGlobal : HaMode::kWeekly, &warning);
  if (!warning.empty()) err << "warning: " << warning << '\n';
  const EvalReport ha_report = evaluate_historical_average(ha, run.series, starts, mc.T, mc.H,
                                                           default_report_horizons());
  write_report_csv(ha_out, ha_report);

  print_report(out, "model (" + a.split + ", " + std::to_string(starts.size()) + " windows):", report);
  print_report(out, "historical average:", ha_report);
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string checkpoint, data, adj, model, out, split = "test";
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  ensure_parent(a.out);
  write_json(sibling(a.out, ".manifest.json"),
             manifest("predict", json{{"split", a.split}}, 0,
                      json{{"checkpoint", input_entry(a.checkpoint)}, {"data", input_entry(a.data)}},
                      json{{"predictions", a.out}}));
  const LoadedRun run = load_run(a.checkpoint, a.data, a.adj, a.model);
  const ModelConfig& mc = run.model.config();
  const auto starts = select_windows(run.series, mc.T, mc.H, run.stride, a.split);
  if (starts.empty()) throw DomainError("prediction range '" + a.split + "' holds no windows");

  const DenseTensor normalized = zscore(run.series.values, run.stats);
  const DenseTensor pred = predict_windows(run.model, normalized, starts, run.stats);
  std::ofstream f(a.out);
  if (!f) throw FormatError("cannot write " + a.out);
  f << "timestamp,vertex_id,horizon_min,pred,actual\n";
  const std::size_t n = run.series.n();
  const std::int64_t minutes = run.series.interval() / 60;
  char buf[64];
  for (std::size_t b = 0; b < starts.size(); ++b) {
    for (std::size_t h = 0; h < mc.H; ++h) {
      const std::size_t row = starts[b] + mc.T + h;
      for (std::size_t i = 0; i < n; ++i) {
        f << run.series.timestamps[row] << ',' << run.series.vertex_ids[i] << ','
          << static_cast<std::int64_t>(h + 1) * minutes << ',';
        std::snprintf(buf, sizeof buf, "%.17g", pred[(b * mc.H + h) * n + i]);
        f << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", run.series.values.at(row, i));
        f << buf << '\n';
      }
    }
  }
  if (!f) throw FormatError("failed writing " + a.out);
  out << "wrote " << starts.size() * n * mc.H << " predictions to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string config, out;
  double tol = 1e-4;
  double step = 1e-5;
  std::uint64_t seed = 0;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  require_file(a.config);
  RunConfig rc = read_run_config(a.config);
  rc.model = rc.model.resolved();
  if (rc.gradcheck_n < 2) throw ArgumentError("gradcheck needs n >= 2");
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_json(sibling(a.out, ".manifest.json"),
               manifest("gradcheck", to_json(rc), a.seed, json{{"config", input_entry(a.config)}},
                        json{{"report", a.out}}));
  }

  SynthSpec spec;
  spec.n = rc.gradcheck_n;
  spec.steps = 1;
  spec.seed = a.seed;
  IstdGcnModel model(generate_synthetic(spec).graph, rc.model);
  const ModelConfig& mc = model.config();
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor history({2, mc.T, model.n(), mc.d_in});
  DenseTensor target({2, mc.H, model.n(), mc.d_out});
  for (double& v : history.values()) v = normal(rng);
  for (double& v : target.values()) v = normal(rng);

  auto objective = [&](bool with_grad) {
    Tape tape;
    const ModelVars vars = model.bind(tape);
    const Var loss = training_loss(tape, model, vars, history, target, rc.train.l2_lambda,
                                   rc.train.l2_squared);
    if (with_grad) tape.backward(loss);
    return tape.value(loss)[0];
  };
  GradCheckOptions opts;
  opts.tolerance = a.tol;
  opts.step = a.step;
  opts.seed = a.seed;
  ops::testing::inject_backward_fault(a.inject_fault);
  GradCheckReport report;
  try {
    auto params = model.params();
    report = grad_check(params, objective, opts);
  } catch (...) {
    ops::testing::inject_backward_fault(false);
    throw;
  }
  ops::testing::inject_backward_fault(false);

  json j = json::array();
  char buf[160];
  for (const auto& p : report.params) {
    std::snprintf(buf, sizeof buf, "%-26s %6zu entries  max rel %.3e  max abs %.3e  %s\n",
                  p.name.c_str(), p.entries_checked, p.max_rel_error, p.max_abs_error,
                  p.passed ? "ok" : "FAIL");
    out << buf;
    j.push_back({{"name", p.name}, {"entries", p.entries_checked},
                 {"max_rel_error", p.max_rel_error}, {"max_abs_error", p.max_abs_error},
                 {"passed", p.passed}});
  }
  std::snprintf(buf, sizeof buf, "%s: max relative error %.3e at tolerance %.1e\n",
                report.passed ? "PASS" : "FAIL", report.max_rel_error, a.tol);
  out << buf;
  if (!a.out.empty()) {
    write_json(a.out, json{{"passed", report.passed}, {"tolerance", a.tol}, {"step", a.step},
                           {"max_rel_error", report.max_rel_error}, {"params", j}});
  }
  return report.passed ? kOk : kInternalError;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec, out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  require_file(a.spec);
  const SynthSpec spec = read_synth_spec(a.spec);
  const std::string speed = a.out + "_speed.csv";
  const std::string dists = a.out + "_distances.csv";
  const std::string ids = a.out + "_ids.txt";
  const std::string adj = a.out + "_adj";
  ensure_parent(a.out + "_x");
  write_json(a.out + "_manifest.json",
             manifest("synth", json::parse(std::ifstream(a.spec)), spec.seed,
                      json{{"spec", input_entry(a.spec)}},
                      json{{"speed", speed}, {"distances", dists}, {"ids", ids},
                           {"adjacency", adj}}));
  const SyntheticData d = generate_synthetic(spec);
  write_speed_csv(speed, d.series);
  write_distance_csv(dists, d.distances);
  {
    std::ofstream f(ids);
    for (const auto& id : d.graph.vertex_ids()) f << id << '\n';
    if (!f) throw FormatError("failed writing " + ids);
  }
  write_adjacency(adj, d.graph);
  out << "wrote " << d.series.steps() << " steps x " << d.series.n() << " sensors to " << speed
      << "; adjacency " << adj << ".csv\n";
  return kOk;
}

std::string env_name(const std::string& name) {
  std::string e = "STDIFF_" + name;
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::toupper(c));
  });
  return e;
}

template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, T& target, const std::string& help) {
  return app->add_option("--" + name, target, help)->envname(env_name(name));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"stdiff: graph-diffusion forecasting of sensor-network traffic speeds"};
  app.name(args.empty() ? "stdiff" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", "stdiff 0.1.0");

  BuildAdjArgs ba;
  auto* build_adj = app.add_subcommand("build-adj", "Gaussian-kernel adjacency from sensor distances");
  opt(build_adj, "distances", ba.distances, "CSV with header from,to,distance")->required();
  opt(build_adj, "ids", ba.ids, "sensor id list, one per line")->required();
  opt(build_adj, "out", ba.out, "output prefix (<prefix>.csv and <prefix>.json)")->required();
  auto* eps = opt(build_adj, "epsilon", ba.epsilon, "keep pairs with distance <= epsilon");
  auto* q = opt(build_adj, "quantile", ba.quantile, "drop weights below this quantile (default 0.1)");
  eps->excludes(q);
  opt(build_adj, "sigma", ba.sigma, "kernel width (default: population std of distances)");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model and keep the best checkpoint");
  opt(train_cmd, "data", ta.data, "speed CSV")->required();
  opt(train_cmd, "adj", ta.adj, "adjacency prefix")->required();
  opt(train_cmd, "config", ta.config, "config JSON")->required();
  opt(train_cmd, "out", ta.out, "output directory")->required();
  opt(train_cmd, "ablation", ta.ablation, "full | no_hstg | no_two_step | no_iteration")
      ->check(CLI::IsMember({"full", "no_hstg", "no_two_step", "no_iteration"}));
  opt(train_cmd, "seed", ta.seed, "seed for initialisation and batch order");
  opt(train_cmd, "epochs", ta.epochs, "override the configured epoch count");
  opt(train_cmd, "resume", ta.resume, "training state written by an earlier run");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint at 15/30/60 min and against HA");
  opt(eval_cmd, "checkpoint", ea.checkpoint, "checkpoint file")->required();
  opt(eval_cmd, "data", ea.data, "speed CSV")->required();
  opt(eval_cmd, "adj", ea.adj, "adjacency prefix (default: <run dir>/adj)");
  opt(eval_cmd, "model", ea.model, "model JSON (default: <run dir>/model.json)");
  opt(eval_cmd, "out", ea.out, "report CSV; HA rows go to <stem>_ha.csv")->required();
  opt(eval_cmd, "split", ea.split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  opt(eval_cmd, "ha-mode", ea.ha_mode, "weekly | global")->check(CLI::IsMember({"weekly", "global"}));

  GradcheckArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  opt(grad_cmd, "config", ga.config, "config JSON (n sets the vertex count)")->required();
  opt(grad_cmd, "tol", ga.tol, "relative tolerance");
  opt(grad_cmd, "step", ga.step, "central-difference step");
  opt(grad_cmd, "seed", ga.seed, "seed for graph, data and subsampling");
  opt(grad_cmd, "out", ga.out, "optional JSON report");
  grad_cmd->add_flag("--inject-backward-fault", ga.inject_fault)->group("");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic sensor network and series");
  opt(synth_cmd, "spec", sa.spec, "JSON {n, steps, seed, alpha, period, noise_std}")->required();
  opt(synth_cmd, "out", sa.out, "output prefix")->required();

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "write long-form predictions for plotting");
  opt(predict_cmd, "checkpoint", pa.checkpoint, "checkpoint file")->required();
  opt(predict_cmd, "data", pa.data, "speed CSV")->required();
  opt(predict_cmd, "adj", pa.adj, "adjacency prefix (default: <run dir>/adj)");
  opt(predict_cmd, "model", pa.model, "model JSON (default: <run dir>/model.json)");
  opt(predict_cmd, "out", pa.out, "output CSV")->required();
  opt(predict_cmd, "split", pa.split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  if (argv.empty()) argv.push_back("stdiff");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*build_adj) return cmd_build_adj(ba, out);
    if (*train_cmd) return cmd_train(ta, out);
    if (*eval_cmd) return cmd_eval(ea, out, err);
    if (*grad_cmd) return cmd_gradcheck(ga, out);
    if (*synth_cmd) return cmd_synth(sa, out);
    if (*predict_cmd) return cmd_predict(pa, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kInternalError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace stdiff::cli
