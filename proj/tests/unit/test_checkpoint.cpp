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

#include "auv/train/checkpoint.hpp"
#include "auv/train/trainer.hpp"
#include "fixtures.hpp"

using namespace auv;
using namespace auv::train;

namespace {

TrainConfig tiny_config() {
  auto cfg = TrainConfig::desk();
  cfg.batch_size = 1;
  cfg.max_segment_sec = 0.1;
  cfg.discriminators = gan::DiscriminatorConfig{{2}, {206}, 2};
  return cfg;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
  std::ofstream(p, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(Checkpoint, FileRoundTripIsBitExact) {
  const auto dir = auv::testing::temp_dir("ckpt_rt");
  Checkpoint c;
  c.config = {{"a", 1}, {"b", {{"c", "x"}}}};
  c.step = 123456789012ULL;
  c.extra = {{"rng", "1 2 3"}};
  std::mt19937_64 rng(1);
  c.tensors.emplace("w", normal_tensor({3, 4}, 1.0, rng));
  c.tensors.emplace("b", Tensor({2}, std::vector<double>{-0.0, 1e-310}));
  save_checkpoint(c, dir / "c.auvc");
  const auto back = load_checkpoint(dir / "c.auvc");
  EXPECT_EQ(back.config, c.config);
  EXPECT_EQ(back.extra, c.extra);
  EXPECT_EQ(back.step, c.step);
  ASSERT_EQ(back.tensors.size(), 2u);
  for (const auto& [name, t] : c.tensors) {
    const auto& u = back.tensors.at(name);
    ASSERT_EQ(u.shape(), t.shape());
    EXPECT_EQ(std::memcmp(u.data(), t.data(), 8 * t.size()), 0) << name;
  }
}

TEST(Checkpoint, TamperTruncateAndVersionErrors) {
  const auto dir = auv::testing::temp_dir("ckpt_bad");
  Checkpoint c;
  c.config = nlohmann::json::object();
  c.extra = nlohmann::json::object();
  c.tensors.emplace("w", Tensor({4}, 0.25));
  save_checkpoint(c, dir / "c.auvc");
  const auto good = read_bytes(dir / "c.auvc");

  auto flipped = good;
  flipped[flipped.size() - 10] ^= 0x01;
  write_bytes(dir / "flip.auvc", flipped);
  try {
    load_checkpoint(dir / "flip.auvc");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }

  write_bytes(dir / "short.auvc", std::vector<char>(good.begin(), good.begin() + 20));
  EXPECT_THROW(load_checkpoint(dir / "short.auvc"), CheckpointError);

  auto magic = good;
  magic[0] = 'X';
  write_bytes(dir / "magic.auvc", magic);
  EXPECT_THROW(load_checkpoint(dir / "magic.auvc"), CheckpointError);

  auto version = good;
  version[4] = 9;
  write_bytes(dir / "version.auvc", version);
  try {
    load_checkpoint(dir / "version.auvc");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version 9"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_checkpoint(dir / "absent.auvc"), IoError);
}

TEST(Checkpoint, TrainerStateRoundTrip) {
  const auto dir = auv::testing::temp_dir("ckpt_trainer");
  const auto entries = load_manifest(auv::testing::write_corpus(dir / "data", auv::testing::smoke_clips()));
  Trainer a(tiny_config());
  ClipLoader loader(16000);
  for (int i = 0; i < 2; ++i) a.step(make_batch(entries, a.config(), a.data_rng(), loader));
  save_checkpoint(a.checkpoint(), dir / "a.auvc");

  Trainer b(tiny_config());
  b.restore(load_checkpoint(dir / "a.auvc"));
  EXPECT_EQ(b.step_count(), 2u);
  const auto pa = a.generator_parameters(), pb = b.generator_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].var.value(), pb[i].var.value()) << pa[i].name;
  for (std::size_t i = 0; i < a.ema().shadow.size(); ++i) EXPECT_EQ(a.ema().shadow[i], b.ema().shadow[i]);

  // Continuing from the restored state reproduces the uninterrupted run.
  ClipLoader la(16000), lb(16000);
  const auto ra = a.step(make_batch(entries, a.config(), a.data_rng(), la));
  const auto rb = b.step(make_batch(entries, b.config(), b.data_rng(), lb));
  EXPECT_EQ(ra.losses, rb.losses);
  EXPECT_EQ(ra.item_indices, rb.item_indices);
}

TEST(Checkpoint, MismatchedHiddenSizeNamesTheField) {
  const auto dir = auv::testing::temp_dir("ckpt_mismatch");
  Trainer a(tiny_config());
  save_checkpoint(a.checkpoint(), dir / "a.auvc");
  auto other = tiny_config();
  other.codec.network.hidden_size = 64;
  other.codec.network.attention_heads = 4;
  Trainer b(other);
  try {
    b.restore(load_checkpoint(dir / "a.auvc"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hidden_size"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, InferenceModelUsesEmaWeights) {
  const auto dir = auv::testing::temp_dir("ckpt_infer");
  Trainer a(tiny_config());
  save_checkpoint(a.checkpoint(), dir / "a.auvc");
  const auto bundle = load_inference_model(dir / "a.auvc");
  const auto ema = a.ema_model();
  const auto pe = ema.parameters(), pi = bundle.model.parameters();
  ASSERT_EQ(pe.size(), pi.size());
  for (std::size_t i = 0; i < pe.size(); ++i) EXPECT_EQ(pe[i].var.value(), pi[i].var.value());
  EXPECT_EQ(to_json(bundle.config), to_json(a.config()));
}
