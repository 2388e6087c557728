// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdiff/tape.hpp"

#include <string>

#include "stdiff/errors.hpp"

namespace stdiff {

Tape::Tape() {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(DenseTensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::param(ParamArray& p) {
  if (p.grad.shape() != p.value.shape()) p.grad = DenseTensor(p.value.shape());
  Node node;
  node.value = p.value;
  node.param = &p;
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::record(std::string_view op, DenseTensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError("non-finite output from op '" + std::string(op) + "'");
  }
  Node node;
  node.value = std::move(value);
  for (auto v : inputs) node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
  const bool needs = node.requires_grad;
  const Var out = push(std::move(node));
  records_.push_back({op, out, needs ? std::move(backward) : BackwardFn{}});
  return out;
}

DenseTensor& Tape::grad(Var v) {
  Node& node = nodes_[v.id];
  if (node.param) return node.param->grad;
  if (!node.grad_live) {
    node.grad = DenseTensor(node.value.shape());
    node.grad_live = true;
  }
  return node.grad;
}

bool Tape::has_grad(Var v) const {
  const Node& node = nodes_[v.id];
  return node.param != nullptr || node.grad_live;
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) throw ShapeError("backward needs a scalar loss");
  for (auto& node : nodes_) {
    if (!node.param) {
      node.grad = DenseTensor();
      node.grad_live = false;
    }
  }
  grad(loss).fill(1.0);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->backward && has_grad(it->output)) it->backward(*this, it->output);
  }
}

}  // namespace stdiff
