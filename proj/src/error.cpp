// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/error.hpp"

namespace stylenerf {

void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace stylenerf
