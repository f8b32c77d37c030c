// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// On-disk run layout:
//
//   $STYLENERF_RUN_ROOT/<run_id>/
//     config.json
//     checkpoints/{adain,nerf,multistyle}.snck
//     stylized/<style_id>/<frame>.png
//     registry.json
//     logs/<subcommand>.jsonl
//     .lock

#include <filesystem>
#include <string>

namespace stylenerf {

constexpr const char* kRunRootVariable = "STYLENERF_RUN_ROOT";

// $STYLENERF_RUN_ROOT when set and non-empty, else ./runs.
std::filesystem::path run_root();

class RunDir {
 public:
  // Validates the id ([A-Za-z0-9._-], not "." or "..") without touching the filesystem.
  RunDir(std::filesystem::path root, const std::string& run_id);

  const std::filesystem::path& path() const { return path_; }
  const std::string& id() const { return id_; }
  std::filesystem::path config() const { return path_ / "config.json"; }
  std::filesystem::path checkpoints() const { return path_ / "checkpoints"; }
  std::filesystem::path checkpoint(const std::string& stage) const { return checkpoints() / (stage + ".snck"); }
  std::filesystem::path stylized() const { return path_ / "stylized"; }
  std::filesystem::path registry() const { return path_ / "registry.json"; }
  std::filesystem::path logs() const { return path_ / "logs"; }
  std::filesystem::path lock_file() const { return path_ / ".lock"; }

  bool exists() const { return std::filesystem::is_directory(path_); }
  // Creates the directory tree (idempotent).
  void create() const;

 private:
  std::filesystem::path path_;
  std::string id_;
};

// Exclusive advisory lock on a run directory, held for the object's lifetime.
// Throws StateError when another process holds it.
class RunLock {
 public:
  explicit RunLock(const RunDir& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace stylenerf
