// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "stylenerf/cli.hpp"

int main(int argc, char** argv) { return stylenerf::run_cli(argc, argv, std::cout, std::cerr); }
