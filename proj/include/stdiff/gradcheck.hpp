// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stdiff/tensor.hpp"

namespace stdiff {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so entries whose true gradient
  // is ~0 are compared on an absolute scale instead of amplifying roundoff.
  double abs_floor = 1e-6;
  // Parameters with more entries are checked on a random subsample.
  std::size_t max_entries = 10000;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  bool passed = true;
  double max_rel_error = 0.0;
};

/// Evaluates the scalar objective. With `with_grad` set, it also runs the
/// backward pass, accumulating into each ParamArray::grad.
using ObjectiveFn = std::function<double(bool with_grad)>;

/// Compares analytic gradients with central differences
/// (f(theta + h) - f(theta - h)) / 2h entry by entry.
/// rel = |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
GradCheckReport grad_check(std::span<ParamArray* const> params, const ObjectiveFn& objective,
                           const GradCheckOptions& options = {});

}  // namespace stdiff
