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

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "auv/core/audio.hpp"
#include "auv/core/error.hpp"

namespace auv::dsp {

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

struct WavReadOptions {
  /// Average all channels into one instead of rejecting multichannel input.
  bool downmix = false;
};

/// Reads a RIFF/WAVE file holding PCM16 or float32 samples. PCM16 is scaled by 1/32768.
/// The declared sample rate is kept as-is.
inline AudioSegment load_wav(const std::filesystem::path& path, WavReadOptions options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path.string());
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw IoError("truncated fmt chunk: " + path.string());
      format = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      if (format == detail::kFormatExtensible && avail >= 26) format = detail::read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1U);
  }
  if (channels == 0 || rate == 0) throw IoError("missing fmt chunk: " + path.string());
  if (data == nullptr) throw IoError("missing data chunk: " + path.string());
  const bool pcm16 = format == detail::kFormatPcm && bits == 16;
  const bool f32 = format == detail::kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw IoError("unsupported WAV encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                  " bits) in " + path.string() + "; expected PCM16 or float32");
  }
  if (channels > 1 && !options.downmix) {
    throw IoError(path.string() + " has " + std::to_string(channels) + " channels; pass --downmix to average them");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw IoError("zero-length audio: " + path.string());

  AudioSegment seg;
  seg.sample_rate = static_cast<int>(rate);
  seg.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * (bits / 8);
      if (pcm16) {
        acc += static_cast<std::int16_t>(detail::read_u16(p)) / 32768.0;
      } else {
        float v;
        std::uint32_t raw = detail::read_u32(p);
        std::memcpy(&v, &raw, sizeof v);
        acc += static_cast<double>(v);
      }
    }
    seg.samples[f] = acc / channels;
  }
  return seg;
}

/// Writes mono PCM16. Samples outside [-1, 1) are clipped with a warning; returns the clip count.
inline std::size_t write_wav(const AudioSegment& segment, const std::filesystem::path& path) {
  if (segment.empty()) throw ConfigError("cannot write an empty audio segment to " + path.string());
  segment.validate();
  std::vector<unsigned char> out;
  const auto data_bytes = static_cast<std::uint32_t>(segment.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, detail::kFormatPcm);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(segment.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(segment.sample_rate) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_bytes);
  std::size_t clipped = 0;
  for (double x : segment.samples) {
    double scaled = std::round(x * 32768.0);
    if (scaled > 32767.0 || scaled < -32768.0) {
      ++clipped;
      scaled = std::clamp(scaled, -32768.0, 32767.0);
    }
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  if (clipped > 0) spdlog::warn("write_wav: clipped {} sample(s) to the PCM16 range in {}", clipped, path.string());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write WAV file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing WAV file: " + path.string());
  return clipped;
}

}  // namespace auv::dsp
