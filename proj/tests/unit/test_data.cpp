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

#include <fstream>
#include <random>

#include "auv/train/config.hpp"
#include "auv/train/data.hpp"
#include "fixtures.hpp"

using namespace auv;
using namespace auv::train;

namespace {

std::filesystem::path write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

AudioSegment ramp(std::size_t n) {
  AudioSegment a{std::vector<double>(n), 16000, Domain::music};
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = static_cast<double>(i);
  return a;
}

}  // namespace

TEST(Manifest, ParsesEntriesAndResolvesRelativePaths) {
  const auto dir = auv::testing::temp_dir("manifest_ok");
  const auto m = write_text(dir / "m.jsonl", R"({"path":"a.wav","domain":"speech"}

{"path":"/abs/b.wav","domain":"other","duration_sec":2.5}
)");
  const auto e = load_manifest(m);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].path, dir / "a.wav");
  EXPECT_EQ(e[0].domain, Domain::speech);
  EXPECT_FALSE(e[0].duration_sec);
  EXPECT_EQ(e[1].path, "/abs/b.wav");
  EXPECT_EQ(*e[1].duration_sec, 2.5);
}

TEST(Manifest, ErrorsNameTheLine) {
  const auto dir = auv::testing::temp_dir("manifest_bad");
  const auto m = write_text(dir / "m.jsonl", "{\"path\":\"a.wav\",\"domain\":\"speech\"}\n{\"path\":\"b.wav\",\"domain\":\"song\"}\n");
  try {
    load_manifest(m);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("song"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_manifest(write_text(dir / "j.jsonl", "{not json\n")), ConfigError);
  EXPECT_THROW(load_manifest(write_text(dir / "p.jsonl", "{\"domain\":\"speech\"}\n")), ConfigError);
  EXPECT_THROW(load_manifest(write_text(dir / "d.jsonl", "{\"path\":\"a.wav\",\"domain\":\"music\",\"duration_sec\":\"x\"}\n")),
               ConfigError);
  EXPECT_THROW(load_manifest(dir / "missing.jsonl"), ConfigError);
  EXPECT_TRUE(load_manifest(write_text(dir / "empty.jsonl", "")).empty());
}

TEST(Crop, LongClipCappedShortClipUnchanged) {
  std::mt19937_64 rng(1);
  const auto twenty = ramp(20 * 16000);
  std::size_t offset = 1;
  const auto cropped = crop_segment(twenty, 12 * 16000, rng, 320, &offset);
  EXPECT_EQ(cropped.size(), 192000u);
  EXPECT_EQ(offset % 320, 0u);
  EXPECT_EQ(cropped.samples.front(), static_cast<double>(offset));
  EXPECT_EQ(cropped.domain, Domain::music);
  const auto five = ramp(5 * 16000);
  const auto same = crop_segment(five, 12 * 16000, rng, 320, &offset);
  EXPECT_EQ(same.size(), 80000u);
  EXPECT_EQ(same.samples, five.samples);
  EXPECT_EQ(offset, 0u);
}

TEST(Crop, SameSeedSameCrops) {
  const auto clip = ramp(50000);
  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(crop_segment(clip, 8000, a, 320).samples, crop_segment(clip, 8000, b, 320).samples);
}

TEST(Batch, DeterministicWithDomainsAndSkipsUnreadable) {
  const auto dir = auv::testing::temp_dir("batch");
  const auto manifest = auv::testing::write_corpus(dir, auv::testing::smoke_clips());
  std::ofstream(manifest, std::ios::app) << R"({"path":"missing.wav","domain":"music"})" << '\n';
  const auto entries = load_manifest(manifest);
  auto cfg = TrainConfig::desk();
  cfg.batch_size = 16;
  cfg.max_segment_sec = 0.5;
  std::mt19937_64 r1(3), r2(3);
  ClipLoader l1(16000), l2(16000);
  const auto b1 = make_batch(entries, cfg, r1, l1);
  const auto b2 = make_batch(entries, cfg, r2, l2);
  ASSERT_EQ(b1.size(), 16u);
  for (std::size_t i = 0; i < b1.size(); ++i) {
    EXPECT_EQ(b1[i].audio.samples, b2[i].audio.samples);
    EXPECT_EQ(b1[i].audio.size(), 8000u);
    EXPECT_EQ(b1[i].domain, *b1[i].audio.domain);
    EXPECT_EQ(b1[i].source_length, 16000u);
    EXPECT_NE(b1[i].source.filename().string().find(std::string(domain_name(b1[i].domain))), std::string::npos);
  }
  EXPECT_LE(l1.failed_count(), 1u);
}

TEST(Batch, AllUnreadableIsAnError) {
  const auto dir = auv::testing::temp_dir("batch_bad");
  const auto m = write_text(dir / "m.jsonl", R"({"path":"nope.wav","domain":"speech"})"
                                             "\n");
  std::mt19937_64 rng(1);
  ClipLoader loader(16000);
  EXPECT_THROW(make_batch(load_manifest(m), TrainConfig::desk(), rng, loader), IoError);
  EXPECT_THROW(make_batch({}, TrainConfig::desk(), rng, loader), ConfigError);
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
  auto cfg = TrainConfig::desk();
  cfg.peak_lr = 2e-4;
  cfg.seed = 42;
  cfg.weights.distill = 0.5;
  const auto j = to_json(cfg);
  const auto back = train_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  auto bad = j;
  bad["learning_rate"] = 1.0;
  EXPECT_THROW(train_config_from_json(bad), ConfigError);
  auto invalid = j;
  invalid["ema_decay"] = 1.5;
  EXPECT_THROW(train_config_from_json(invalid).validate(), ConfigError);
}

TEST(TrainConfigJson, PresetsDiffer) {
  const auto desk = TrainConfig::desk();
  const auto full = TrainConfig::full();
  EXPECT_EQ(desk.codec.network.hidden_size, 128u);
  EXPECT_EQ(desk.codec.codebook.size, 256u);
  EXPECT_EQ(full.codec.codebook.size, 16384u);
  EXPECT_EQ(full.batch_size, 128u);
  EXPECT_EQ(full.max_segment_sec, 12.0);
  EXPECT_EQ(full.peak_lr, 1e-4);
  EXPECT_EQ(full.warmup_updates, 5000u);
  EXPECT_EQ(full.cosine_updates, 500000u);
  EXPECT_NO_THROW(desk.validate());
  EXPECT_NO_THROW(full.validate());
}
