// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace stylenerf {

// Bad input: shapes, ranges, malformed requests. CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called on an object that is not ready for it (no checkpoint,
// untrained network, locked run directory).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint archive failures. Each kind is distinct so callers can tell a
// truncated file from a file written by another format revision.
class CorruptArchiveError : public IoError {
 public:
  using IoError::IoError;
};

class VersionMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class StageTagError : public StateError {
 public:
  using StateError::StateError;
};

class DigestMismatchError : public StateError {
 public:
  using StateError::StateError;
};

// Throws ValidationError with `what` when `cond` is false.
void require(bool cond, const std::string& what);

}  // namespace stylenerf
