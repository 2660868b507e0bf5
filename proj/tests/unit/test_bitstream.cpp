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

#include <gtest/gtest.h>

#include <random>

#include <zlib.h>

#include "auv/bitstream/token_stream.hpp"
#include "fixtures.hpp"

using namespace auv;
using namespace auv::bitstream;

namespace {

TokenStream stream_of(std::vector<std::uint32_t> tokens, std::uint32_t k) {
  TokenStream s;
  s.codebook_size = k;
  s.original_length = static_cast<std::uint32_t>(tokens.size() * 320);
  s.tokens = std::move(tokens);
  return s;
}

StreamError::Kind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    unpack(bytes);
  } catch (const StreamError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no StreamError";
  return StreamError::Kind::bad_magic;
}

void rewrite_crc(std::vector<std::uint8_t>& b) {
  const auto c = static_cast<std::uint32_t>(crc32(0L, b.data(), 23));
  for (int i = 0; i < 4; ++i) b[23 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(c >> (8 * i));
}

}  // namespace

TEST(Bitstream, TokenWidths) {
  EXPECT_EQ(token_width(16384), 14u);
  EXPECT_EQ(token_width(20480), 15u);
  EXPECT_EQ(token_width(256), 8u);
  EXPECT_EQ(token_width(2), 1u);
  EXPECT_EQ(token_width(257), 9u);
  EXPECT_THROW(token_width(1), ConfigError);
}

TEST(Bitstream, Bitrates) {
  EXPECT_EQ(bitrate(16000, 320, 16384), 700.0);
  EXPECT_EQ(bitrate(16000, 320, 20480), 750.0);
  EXPECT_EQ(bitrate(16000, 320, 256), 400.0);
  EXPECT_EQ(16000.0 / 320.0, 50.0);
  EXPECT_EQ(expected_token_count(16000 * 4, 320), 200u);
  EXPECT_EQ(expected_token_count(16001, 320), 51u);
}

TEST(Bitstream, HeaderLayout) {
  auto s = stream_of({5}, 256);
  s.original_length = 300;
  const auto b = pack(s);
  ASSERT_EQ(b.size(), kHeaderBytes + 1);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "AUVT");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5] | (b[6] << 8), 16000);
  EXPECT_EQ(b[9] | (b[10] << 8), 320);
  EXPECT_EQ(b[11] | (b[12] << 8), 256);
  EXPECT_EQ(b[15] | (b[16] << 8), 300);
  EXPECT_EQ(b[19], 1);
  EXPECT_EQ(b[27], 5);
}

TEST(Bitstream, SingleZeroTokenPayload) {
  const auto b = pack(stream_of({0}, 256));
  ASSERT_EQ(b.size(), kHeaderBytes + 1);
  EXPECT_EQ(b.back(), 0x00);
}

TEST(Bitstream, FourteenBitPayloadBitByBit) {
  // 1, 2, 3 as 14-bit MSB-first fields, then six zero pad bits:
  // 00000000 00000100 00000000 00100000 00000000 11000000
  const auto b = pack(stream_of({1, 2, 3}, 16384));
  const std::vector<std::uint8_t> payload(b.begin() + kHeaderBytes, b.end());
  EXPECT_EQ(payload, (std::vector<std::uint8_t>{0x00, 0x04, 0x00, 0x20, 0x00, 0xC0}));
}

TEST(Bitstream, RandomRoundTrips) {
  std::mt19937_64 rng(99);
  const std::uint32_t sizes[] = {256, 16384, 20480};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t k = sizes[trial % 3];
    TokenStream s;
    s.codebook_size = k;
    s.original_length = std::uniform_int_distribution<std::uint32_t>(1, 20000)(rng);
    s.tokens.resize(expected_token_count(s.original_length, s.hop));
    for (auto& t : s.tokens) t = std::uniform_int_distribution<std::uint32_t>(0, k - 1)(rng);
    const auto bytes = pack(s);
    ASSERT_EQ(bytes.size(), kHeaderBytes + (s.tokens.size() * token_width(k) + 7) / 8);
    ASSERT_EQ(unpack(bytes), s) << "trial " << trial;
  }
}

TEST(Bitstream, CorruptionIsDetected) {
  const auto good = pack(stream_of({10, 200, 30, 40}, 256));
  auto magic = good;
  magic[1] = 'X';
  EXPECT_EQ(kind_of(magic), StreamError::Kind::bad_magic);
  try {
    unpack(magic);
  } catch (const StreamError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
  auto header = good;
  header[12] ^= 0x10;
  EXPECT_EQ(kind_of(header), StreamError::Kind::checksum);
  auto version = good;
  version[4] = 2;
  rewrite_crc(version);
  EXPECT_EQ(kind_of(version), StreamError::Kind::bad_version);
  const std::vector<std::uint8_t> short_payload(good.begin(), good.end() - 1);
  EXPECT_EQ(kind_of(short_payload), StreamError::Kind::truncated);
  try {
    unpack(short_payload);
  } catch (const StreamError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 32 bits, found 24"), std::string::npos) << e.what();
  }
  const std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 10);
  EXPECT_EQ(kind_of(short_header), StreamError::Kind::truncated);
  auto count = good;
  count[19] = 7;
  rewrite_crc(count);
  EXPECT_EQ(kind_of(count), StreamError::Kind::invalid_header);
}

TEST(Bitstream, OutOfRangeTokens) {
  EXPECT_THROW(pack(stream_of({256}, 256)), StreamError);
  // K = 200 leaves 8-bit fields that can hold values >= K.
  auto b = pack(stream_of({199}, 200));
  b.back() = 0xFF;
  EXPECT_EQ(kind_of(b), StreamError::Kind::out_of_range);
  auto s = stream_of({1, 2}, 256);
  s.original_length = 2000;
  EXPECT_THROW(pack(s), ConfigError);
}

TEST(Bitstream, FileRoundTrip) {
  const auto dir = auv::testing::temp_dir("auvt");
  const auto s = stream_of({1, 2, 3, 16383}, 16384);
  write_stream(s, dir / "s.auvt");
  EXPECT_EQ(read_stream(dir / "s.auvt"), s);
  EXPECT_THROW(read_stream(dir / "missing.auvt"), IoError);
}
