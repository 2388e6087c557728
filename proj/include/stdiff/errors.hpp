// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace stdiff {

// Input-side failures (bad shapes, ids, files, arguments) derive from
// InputError; the CLI maps them to exit code 2. Everything else is internal.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class IdentifierError : public InputError {
 public:
  using InputError::InputError;
};

class ArgumentError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

// Numeric breakdown during computation (NaN/Inf loss or gradient).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stdiff
