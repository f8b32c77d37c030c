// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/run_dir.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "stylenerf/error.hpp"

namespace stylenerf {

namespace fs = std::filesystem;

fs::path run_root() {
  const char* env = std::getenv(kRunRootVariable);
  if (env != nullptr && *env != '\0') return env;
  return "runs";
}

RunDir::RunDir(fs::path root, const std::string& run_id) : id_(run_id) {
  require(!run_id.empty() && run_id.size() <= 128, "run id must be 1 to 128 characters");
  require(run_id != "." && run_id != "..", "run id must not be '.' or '..'");
  for (char c : run_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    require(ok, "run id '" + run_id + "' may only contain letters, digits, '.', '_' and '-'");
  }
  path_ = std::move(root) / run_id;
}

void RunDir::create() const {
  std::error_code ec;
  for (const fs::path& p : {path_, checkpoints(), stylized(), logs()}) {
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
  }
}

RunLock::RunLock(const RunDir& dir) {
  dir.create();
  const std::string path = dir.lock_file().string();
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open lock file " + path + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw StateError("run directory " + dir.path().string() + " is locked by another process");
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace stylenerf
