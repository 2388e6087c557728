// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "stdiff/tensor.hpp"

namespace stdiff {

struct NamedTensor {
  std::string name;
  DenseTensor value;
  bool operator==(const NamedTensor&) const = default;
};

// Binary layout, all integers little-endian:
//   "STDF1" | u32 count | count x { u32 name_len | name | u32 rank | u64 dims[rank] | f64 values }
void write_checkpoint(const std::string& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

std::string encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);

std::vector<NamedTensor> snapshot(std::span<ParamArray* const> params);
/// Copies values into params by name. Missing or extra names and shape
/// mismatches throw ShapeError.
void restore(std::span<ParamArray* const> params, std::span<const NamedTensor> tensors);

}  // namespace stdiff
