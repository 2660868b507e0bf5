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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "auv/core/error.hpp"

namespace auv::bitstream {

inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 27;

struct TokenStream {
  std::uint32_t sample_rate = 16000;
  std::uint16_t hop = 320;
  std::uint32_t codebook_size = 256;
  std::uint32_t original_length = 0;
  std::vector<std::uint32_t> tokens;

  bool operator==(const TokenStream&) const = default;
};

class StreamError : public IoError {
 public:
  enum class Kind { bad_magic, bad_version, checksum, invalid_header, truncated, out_of_range };
  StreamError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Bits per token: ceil(log2 K).
inline unsigned token_width(std::uint64_t codebook_size) {
  if (codebook_size < 2) throw ConfigError("token_width: codebook size must be at least 2");
  unsigned w = 0;
  while ((std::uint64_t{1} << w) < codebook_size) ++w;
  return w;
}

/// Payload bitrate, header excluded.
inline double bitrate(std::uint32_t sample_rate, std::uint32_t hop, std::uint64_t codebook_size) {
  return static_cast<double>(sample_rate) / static_cast<double>(hop) * token_width(codebook_size);
}
inline double bitrate(const TokenStream& s) { return bitrate(s.sample_rate, s.hop, s.codebook_size); }

inline std::size_t expected_token_count(std::size_t original_length, std::size_t hop) { return (original_length + hop - 1) / hop; }

/// Header (27 bytes, little-endian integers):
///   0 "AUVT" | 4 version u8 | 5 sample_rate u32 | 9 hop u16 | 11 K u32
///   15 original_length u32 | 19 token_count u32 | 23 CRC32 of bytes 0..22
/// Payload: tokens as MSB-first bit fields of token_width(K) bits, zero-padded to a byte.
inline std::vector<std::uint8_t> pack(const TokenStream& s) {
  const unsigned width = token_width(s.codebook_size);
  if (s.hop == 0) throw ConfigError("pack: hop must be positive");
  if (s.tokens.size() != expected_token_count(s.original_length, s.hop)) {
    throw ConfigError("pack: " + std::to_string(s.tokens.size()) + " tokens for " + std::to_string(s.original_length) +
                      " samples at hop " + std::to_string(s.hop) + " (expected " +
                      std::to_string(expected_token_count(s.original_length, s.hop)) + ")");
  }
  std::vector<std::uint8_t> out{'A', 'U', 'V', 'T', kStreamVersion};
  auto le = [&out](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  le(s.sample_rate, 4);
  le(s.hop, 2);
  le(s.codebook_size, 4);
  le(s.original_length, 4);
  le(s.tokens.size(), 4);
  le(crc32(0L, out.data(), static_cast<uInt>(out.size())), 4);

  const std::size_t bits = s.tokens.size() * width;
  const std::size_t start = out.size();
  out.resize(start + (bits + 7) / 8, 0);
  std::size_t pos = 0;
  for (auto t : s.tokens) {
    if (t >= s.codebook_size) {
      throw StreamError(StreamError::Kind::out_of_range,
                        "token " + std::to_string(t) + " out of range for K=" + std::to_string(s.codebook_size));
    }
    for (int b = static_cast<int>(width) - 1; b >= 0; --b, ++pos)
      if ((t >> b) & 1U) out[start + pos / 8] |= static_cast<std::uint8_t>(0x80U >> (pos % 8));
  }
  return out;
}

inline TokenStream unpack(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "AUVT", 4) != 0) throw StreamError(StreamError::Kind::bad_magic, "bad magic");
  if (bytes.size() < kHeaderBytes) {
    throw StreamError(StreamError::Kind::truncated,
                      "truncated header: " + std::to_string(bytes.size()) + " of " + std::to_string(kHeaderBytes) + " bytes");
  }
  auto le = [&bytes](std::size_t off, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes[off + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  };
  if (static_cast<std::uint32_t>(crc32(0L, bytes.data(), 23)) != le(23, 4))
    throw StreamError(StreamError::Kind::checksum, "header checksum mismatch");
  if (bytes[4] != kStreamVersion) {
    throw StreamError(StreamError::Kind::bad_version, "unsupported stream version " + std::to_string(bytes[4]));
  }
  TokenStream s;
  s.sample_rate = static_cast<std::uint32_t>(le(5, 4));
  s.hop = static_cast<std::uint16_t>(le(9, 2));
  s.codebook_size = static_cast<std::uint32_t>(le(11, 4));
  s.original_length = static_cast<std::uint32_t>(le(15, 4));
  const auto count = static_cast<std::size_t>(le(19, 4));
  if (s.hop == 0) throw StreamError(StreamError::Kind::invalid_header, "invalid header: hop is zero");
  if (s.codebook_size < 2) throw StreamError(StreamError::Kind::invalid_header, "invalid header: codebook size below 2");
  if (count != expected_token_count(s.original_length, s.hop)) {
    throw StreamError(StreamError::Kind::invalid_header, "invalid header: token count " + std::to_string(count) +
                                                       " inconsistent with original length " + std::to_string(s.original_length));
  }
  const unsigned width = token_width(s.codebook_size);
  const std::size_t expected_bits = count * width;
  const std::size_t actual_bits = (bytes.size() - kHeaderBytes) * 8;
  if (actual_bits < expected_bits || bytes.size() - kHeaderBytes != (expected_bits + 7) / 8) {
    throw StreamError(StreamError::Kind::truncated, "payload size mismatch: expected " + std::to_string(expected_bits) +
                                                        " bits, found " + std::to_string(actual_bits));
  }
  s.tokens.resize(count);
  std::size_t pos = 0;
  for (auto& t : s.tokens) {
    std::uint32_t v = 0;
    for (unsigned b = 0; b < width; ++b, ++pos) v = (v << 1) | ((bytes[kHeaderBytes + pos / 8] >> (7 - pos % 8)) & 1U);
    if (v >= s.codebook_size) {
      throw StreamError(StreamError::Kind::out_of_range,
                        "token " + std::to_string(v) + " out of range for K=" + std::to_string(s.codebook_size));
    }
    t = v;
  }
  return s;
}

inline void write_stream(const TokenStream& s, const std::filesystem::path& path) {
  const auto bytes = pack(s);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write token stream: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline TokenStream read_stream(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open token stream: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return unpack(bytes);
}

}  // namespace auv::bitstream
