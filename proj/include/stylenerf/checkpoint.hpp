// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Single-file model archive shared by all three stages.
//
//   "SNCK" | u32 version | u64 header bytes | JSON header | f32 payload | sha256 hex (64 bytes)
//
// The header holds the stage tag, config snapshot, upstream digests, free-form
// metadata and the tensor table (name, shape, offset into the payload). The
// trailing hash covers everything before it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylenerf/nn.hpp"

namespace stylenerf {

enum class Stage { kAdain, kNerf, kMultistyle };

std::string stage_name(Stage stage);
Stage parse_stage(const std::string& name);

constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelCheckpoint {
  Stage stage = Stage::kNerf;
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> digests;  // "encoder", "trunk", "registry", ...
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  // Tensors whose names start with `prefix`, prefix kept.
  std::vector<NamedTensor> with_prefix(const std::string& prefix) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes,
                                       std::optional<Stage> expected = std::nullopt);

// Writes to a temporary sibling and renames it over `path`.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
// Throws CorruptArchiveError, VersionMismatchError or StageTagError; never
// returns a partially decoded checkpoint.
ModelCheckpoint load_checkpoint(const std::filesystem::path& path,
                                std::optional<Stage> expected = std::nullopt);

// Throws DigestMismatchError unless ckpt.digests[key] == actual.
void expect_digest(const ModelCheckpoint& ckpt, const std::string& key, const std::string& actual);

// Hash of the serialized archive.
std::string checkpoint_digest(const ModelCheckpoint& ckpt);

// Atomic whole-file write (temp + rename), creating parent directories.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace stylenerf
