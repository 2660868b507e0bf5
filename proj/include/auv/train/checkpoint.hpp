/*
 * Copyright 2026 The AUV Codec Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "auv/core/tensor.hpp"

namespace auv::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything a checkpoint file holds. Tensors are stored as raw IEEE doubles,
/// so save/load is bit-exact.
struct Checkpoint {
  nlohmann::json config;
  std::size_t step = 0;
  nlohmann::json extra;  ///< small state such as optimizer step counts and RNG state
  std::map<std::string, Tensor> tensors;
};

class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_bytes(std::vector<unsigned char>& out, const std::string& s) {
  put_u64(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string str() {
    const auto n = static_cast<std::size_t>(u(8));
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void doubles(double* out, std::size_t n) {
    need(8 * n);
    std::memcpy(out, bytes_.data() + pos_, 8 * n);
    pos_ += 8 * n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw CheckpointError("checkpoint is truncated");
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Layout: "AUVC", version u32, step u64, config JSON, extra JSON, tensor count u64,
// then per tensor: name, rank u64, dims u64..., raw little-endian doubles.
// Strings are u64 length + bytes. A CRC32 of all preceding bytes closes the file.
inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "checkpoint tensors are written in host order");
  std::vector<unsigned char> out{'A', 'U', 'V', 'C'};
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, ckpt.step);
  detail::put_bytes(out, ckpt.config.dump());
  detail::put_bytes(out, ckpt.extra.dump());
  detail::put_u64(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    detail::put_bytes(out, name);
    detail::put_u64(out, t.rank());
    for (auto d : t.shape()) detail::put_u64(out, d);
    const auto* raw = reinterpret_cast<const unsigned char*>(t.data());
    out.insert(out.end(), raw, raw + 8 * t.size());
  }
  detail::put_u32(out, static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size()))));
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write checkpoint: " + path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "AUVC", 4) != 0) throw CheckpointError("not a checkpoint file: " + path.string());
  detail::Reader header(bytes, bytes.size());
  header.u(4);
  const auto version = header.u(4);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(i)]) << (8 * i);
  if (static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body))) != stored)
    throw CheckpointError("checkpoint is corrupt (checksum mismatch): " + path.string());

  detail::Reader r(bytes, body);
  r.u(4);
  r.u(4);
  Checkpoint ckpt;
  ckpt.step = static_cast<std::size_t>(r.u(8));
  try {
    ckpt.config = nlohmann::json::parse(r.str());
    ckpt.extra = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint metadata unreadable: ") + e.what());
  }
  const auto count = r.u(8);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.u(8);
    Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.u(8)));
    Tensor t(shape);
    r.doubles(t.data(), t.size());
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw CheckpointError("checkpoint has trailing bytes");
  return ckpt;
}

/// First path at which two JSON documents differ, "" when equal.
inline std::string first_difference(const nlohmann::json& a, const nlohmann::json& b, const std::string& prefix = "") {
  if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      const std::string p = prefix.empty() ? k : prefix + "." + k;
      if (!b.contains(k)) return p;
      if (auto d = first_difference(v, b.at(k), p); !d.empty()) return d;
    }
    for (const auto& [k, v] : b.items())
      if (!a.contains(k)) return prefix.empty() ? k : prefix + "." + k;
    return "";
  }
  return a == b ? "" : (prefix.empty() ? "<root>" : prefix);
}

}  // namespace auv::train
