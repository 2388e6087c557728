// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "stdiff/config.hpp"
#include "stdiff/data.hpp"
#include "stdiff/errors.hpp"
#include "stdiff/graph.hpp"
#include "stdiff/metrics.hpp"
#include "stdiff/model.hpp"
#include "stdiff/stgraph.hpp"

namespace py = pybind11;
using stdiff::DenseTensor;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseTensor to_tensor(const Array& a) {
  stdiff::Shape shape(a.shape(), a.shape() + a.ndim());
  return DenseTensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const DenseTensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

Array dense(const stdiff::SparseMatrix& m) { return to_array(m.to_dense()); }

stdiff::SensorGraph graph_from(const Array& w) {
  if (w.ndim() != 2 || w.shape(0) != w.shape(1)) throw stdiff::ShapeError("adjacency must be square");
  std::vector<std::string> ids;
  for (py::ssize_t i = 0; i < w.shape(0); ++i) ids.push_back("s" + std::to_string(i));
  return stdiff::SensorGraph(ids, stdiff::SparseMatrix::from_dense(to_tensor(w)));
}

Array gaussian_adjacency(const std::vector<std::tuple<std::string, std::string, double>>& edges,
                         const std::vector<std::string>& ids, double threshold, bool distance_mode) {
  std::vector<stdiff::DistanceRecord> recs;
  for (const auto& [from, to, d] : edges) recs.push_back({from, to, d});
  stdiff::GaussianKernelOptions o;
  o.threshold = threshold;
  o.mode = distance_mode ? stdiff::ThresholdMode::kDistance : stdiff::ThresholdMode::kWeightQuantile;
  return dense(stdiff::build_gaussian_adjacency(recs, ids, o).adjacency());
}

py::dict hstg(const Array& w, std::size_t m, std::size_t hops, bool transposed) {
  stdiff::StGraphOptions o;
  o.hops = hops;
  o.direction = transposed ? stdiff::TemporalDirection::kTransposed : stdiff::TemporalDirection::kAsWritten;
  const auto g = stdiff::build_hstg(graph_from(w), m, o);
  py::list ph, pnh;
  for (std::size_t k = 1; k <= hops; ++k) {
    ph.append(dense(g.hstg_power(k)));
    pnh.append(dense(g.nhstg_power(k)));
  }
  py::dict d;
  d["hstg_adjacency"] = dense(g.hstg_adjacency());
  d["nhstg_adjacency"] = dense(g.nhstg_adjacency());
  d["hstg_powers"] = ph;
  d["nhstg_powers"] = pnh;
  return d;
}

py::dict synth(const std::string& spec_json) {
  const auto data = stdiff::generate_synthetic(stdiff::parse_synth_spec(spec_json));
  py::dict d;
  d["speed"] = to_array(data.series.values);
  d["timestamps"] = data.series.timestamps;
  d["vertex_ids"] = data.series.vertex_ids;
  d["adjacency"] = dense(data.graph.adjacency());
  d["transition"] = dense(data.transition);
  return d;
}

py::tuple run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stdiff");
  std::ostringstream out, err;
  const int code = stdiff::cli::run(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph-diffusion forecasting of sensor-network traffic speeds";

  py::register_exception<stdiff::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<stdiff::NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("gaussian_adjacency", &gaussian_adjacency, py::arg("edges"), py::arg("ids"),
        py::arg("threshold") = 0.1, py::arg("distance_mode") = false,
        "Thresholded Gaussian-kernel adjacency from (from, to, distance) records.");
  m.def(
      "transition_matrix",
      [](const Array& w, bool self_loops) {
        auto a = stdiff::SparseMatrix::from_dense(to_tensor(w));
        if (self_loops) a = stdiff::add_self_loops(a);
        return dense(stdiff::transition_matrix(a));
      },
      py::arg("adjacency"), py::arg("self_loops") = true);
  m.def("hstg", &hstg, py::arg("adjacency"), py::arg("m"), py::arg("hops") = 1,
        py::arg("transposed") = false);
  m.def("encode_iteration_count", &stdiff::encode_iteration_count, py::arg("T"), py::arg("m"));
  m.def("synth", &synth, py::arg("spec_json") = "{}");

  m.def("mae", [](const Array& p, const Array& t) { return stdiff::mae(to_tensor(p), to_tensor(t)); });
  m.def("rmse", [](const Array& p, const Array& t) { return stdiff::rmse(to_tensor(p), to_tensor(t)); });
  m.def("mape", [](const Array& p, const Array& t) { return stdiff::mape(to_tensor(p), to_tensor(t)); });

  py::class_<stdiff::IstdGcnModel>(m, "Model")
      .def(py::init([](const Array& w, const std::string& config_json) {
             return stdiff::IstdGcnModel(graph_from(w), stdiff::parse_run_config(config_json).model);
           }),
           py::arg("adjacency"), py::arg("config_json") = "{}")
      .def_property_readonly("n", &stdiff::IstdGcnModel::n)
      .def_property_readonly("parameter_count", &stdiff::IstdGcnModel::parameter_count)
      .def(
          "parameter_names",
          [](const stdiff::IstdGcnModel& model) {
            std::vector<std::string> names;
            for (const auto* p : model.params()) names.push_back(p->name);
            return names;
          })
      .def(
          "predict", [](const stdiff::IstdGcnModel& model, const Array& x) { return to_array(model.predict(to_tensor(x))); },
          py::arg("window"), "[T, n, d_in] or [B, T, n, d_in] in, [.., H, n, d_out] out.");

  m.def("run_cli", &run_cli, py::arg("args"), "Runs a stdiff subcommand; returns (exit_code, stdout, stderr).");
}
