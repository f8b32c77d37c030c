// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/checkpoint.hpp"

#include <unistd.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "stylenerf/digest.hpp"
#include "stylenerf/error.hpp"

namespace stylenerf {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::size_t kPrefix = 4 + 4 + 8;
constexpr std::size_t kTrailer = 64;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return v;
}

std::string hash_bytes(const std::uint8_t* data, std::size_t n) {
  return sha256_hex(std::span<const std::byte>(reinterpret_cast<const std::byte*>(data), n));
}

}  // namespace

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kAdain: return "adain";
    case Stage::kNerf: return "nerf";
    case Stage::kMultistyle: return "multistyle";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  if (name == "adain") return Stage::kAdain;
  if (name == "nerf") return Stage::kNerf;
  if (name == "multistyle") return Stage::kMultistyle;
  throw ValidationError("unknown stage '" + name + "' (expected adain, nerf or multistyle)");
}

const NamedTensor* ModelCheckpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<NamedTensor> ModelCheckpoint::with_prefix(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  for (const NamedTensor& t : tensors)
    if (t.name.compare(0, prefix.size(), prefix) == 0) out.push_back(t);
  return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt) {
  nlohmann::json header;
  header["stage"] = stage_name(ckpt.stage);
  header["config"] = ckpt.config;
  header["digests"] = ckpt.digests;
  header["metadata"] = ckpt.metadata;
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const NamedTensor& t : ckpt.tensors) {
    std::size_t n = 1;
    for (auto d : t.shape) n *= static_cast<std::size_t>(d);
    require(n == t.values.size(), "checkpoint: tensor '" + t.name + "' shape does not match its values");
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
    offset += t.values.size();
  }
  header["tensors"] = table;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPrefix + text.size() + offset * sizeof(float) + kTrailer);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, ckpt.version);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const NamedTensor& t : ckpt.tensors) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.values.data());
    out.insert(out.end(), p, p + t.values.size() * sizeof(float));
  }
  const std::string h = hash_bytes(out.data(), out.size());
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

ModelCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, std::optional<Stage> expected) {
  if (bytes.size() < kPrefix + kTrailer || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CorruptArchiveError("checkpoint: not a checkpoint archive or truncated header");
  }
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint: format version " + std::to_string(version) + ", this build reads version " +
                               std::to_string(kCheckpointVersion));
  }
  const std::size_t body = bytes.size() - kTrailer;
  const std::string stored(bytes.begin() + body, bytes.end());
  if (hash_bytes(bytes.data(), body) != stored) {
    throw CorruptArchiveError("checkpoint: integrity hash mismatch (truncated or modified file)");
  }
  const auto header_len = get<std::uint64_t>(bytes, 8);
  if (header_len > body - kPrefix) throw CorruptArchiveError("checkpoint: header length exceeds file size");

  ModelCheckpoint ckpt;
  ckpt.version = version;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + header_len);
    ckpt.stage = parse_stage(header.at("stage").get<std::string>());
    ckpt.config = header.at("config");
    ckpt.digests = header.at("digests").get<std::map<std::string, std::string>>();
    ckpt.metadata = header.at("metadata");
    const std::size_t payload = kPrefix + header_len;
    const std::size_t floats = (body - payload) / sizeof(float);
    if ((body - payload) % sizeof(float) != 0) throw CorruptArchiveError("checkpoint: ragged payload");
    for (const auto& entry : header.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (offset + count > floats) throw CorruptArchiveError("checkpoint: tensor '" + t.name + "' out of range");
      t.values.resize(count);
      std::memcpy(t.values.data(), bytes.data() + payload + offset * sizeof(float), count * sizeof(float));
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptArchiveError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ValidationError& e) {
    throw CorruptArchiveError(std::string("checkpoint: ") + e.what());
  }
  if (expected && *expected != ckpt.stage) {
    throw StageTagError("checkpoint holds stage '" + stage_name(ckpt.stage) + "' but stage '" +
                        stage_name(*expected) + "' was expected");
  }
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<Stage> expected) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return deserialize_checkpoint(read_file(path), expected);
}

void expect_digest(const ModelCheckpoint& ckpt, const std::string& key, const std::string& actual) {
  const auto it = ckpt.digests.find(key);
  if (it == ckpt.digests.end()) {
    throw DigestMismatchError("checkpoint (" + stage_name(ckpt.stage) + ") records no '" + key + "' digest");
  }
  if (it->second != actual) {
    throw DigestMismatchError(key + " digest mismatch: checkpoint has " + it->second.substr(0, 12) +
                              ", found " + actual.substr(0, 12));
  }
}

std::string checkpoint_digest(const ModelCheckpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  return hash_bytes(bytes.data(), bytes.size());
}

}  // namespace stylenerf
