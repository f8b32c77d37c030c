// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The `stylenerf` command. Exit codes: 0 success, 1 invalid input or usage,
// 2 runtime failure. Progress goes to `out` as one JSON object per line.

#include <ostream>
#include <string>
#include <vector>

namespace stylenerf {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stylenerf
