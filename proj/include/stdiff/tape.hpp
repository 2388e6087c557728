// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "stdiff/tensor.hpp"

namespace stdiff {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool operator==(const Var&) const = default;
};

/// Reverse-mode record of the forward pass. One record per executed op;
/// backward() replays them in exact reverse order. A tape is owned by a
/// single worker and referenced sparse matrices must outlive it.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var out)>;

  struct Record {
    std::string_view op;
    Var output;
    BackwardFn backward;
  };

  Tape();

  /// Leaf without gradient.
  Var constant(DenseTensor value);
  /// Leaf bound to a parameter; its gradient accumulates into p.grad.
  Var param(ParamArray& p);

  /// Appends one op record. `backward` runs only if some input needs a gradient.
  Var record(std::string_view op, DenseTensor value, std::span<const Var> inputs,
             BackwardFn backward);

  const DenseTensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient buffer for v, zero-initialised on first access.
  DenseTensor& grad(Var v);
  bool has_grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and runs all records backwards. Intermediate
  /// gradients are reset first, so replaying a tape is repeatable; parameter
  /// gradients accumulate.
  void backward(Var loss);

  std::span<const Record> records() const { return records_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  /// NaN/Inf tripwire on every recorded value; on by default in debug builds.
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  struct Node {
    DenseTensor value;
    DenseTensor grad;
    ParamArray* param = nullptr;
    bool requires_grad = false;
    bool grad_live = false;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::vector<Record> records_;
  bool check_finite_;
};

}  // namespace stdiff
