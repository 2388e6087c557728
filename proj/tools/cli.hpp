// Copyright 2026 The stdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stdiff::cli {

enum ExitCode : int { kOk = 0, kInternalError = 1, kInputError = 2 };

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Git object id of a blob: SHA-1 over "blob <size>\0<bytes>", lower-case hex.
std::string git_blob_sha1(const std::string& bytes);
std::string file_git_sha1(const std::string& path);

}  // namespace stdiff::cli
