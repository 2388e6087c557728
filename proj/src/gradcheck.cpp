// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stdiff/errors.hpp"

namespace stdiff {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("grad_check: non-finite ") + what);
  return v;
}

}  // namespace

GradCheckReport grad_check(std::span<ParamArray* const> params, const ObjectiveFn& objective,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ArgumentError("grad_check: step must be > 0");

  for (ParamArray* p : params) {
    if (p->grad.shape() != p->value.shape()) p->grad = DenseTensor(p->value.shape());
    p->zero_grad();
  }
  checked(objective(true), "loss");
  std::vector<DenseTensor> analytic;
  analytic.reserve(params.size());
  for (ParamArray* p : params) analytic.push_back(p->grad);

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamArray& p = *params[pi];
    std::vector<std::size_t> entries(p.value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (entries.size() > options.max_entries) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries);
      std::sort(entries.begin(), entries.end());
    }

    ParamCheck pc;
    pc.name = p.name;
    for (std::size_t e : entries) {
      const double orig = p.value[e];
      p.value[e] = orig + options.step;
      const double up = checked(objective(false), "loss");
      p.value[e] = orig - options.step;
      const double down = checked(objective(false), "loss");
      p.value[e] = orig;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][e];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      pc.max_abs_error = std::max(pc.max_abs_error, abs_err);
      pc.max_rel_error = std::max(pc.max_rel_error, rel);
      ++pc.entries_checked;
    }
    pc.passed = pc.max_rel_error <= options.tolerance;
    report.passed = report.passed && pc.passed;
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.params.push_back(std::move(pc));
  }
  return report;
}

}  // namespace stdiff
