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

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "auv/vq/quantizer.hpp"
#include "auv/vq/stats.hpp"

using namespace auv;
using vq::IndexRange;
using vq::PartitionTable;

namespace {

// Independent scan: out-of-mask distances are +inf, ties keep the first index.
std::uint32_t brute_force(const std::vector<double>& q, const Tensor& book, const std::vector<bool>& allowed) {
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t arg = 0;
  bool found = false;
  for (std::uint32_t k = 0; k < book.rows(); ++k) {
    double d = std::numeric_limits<double>::infinity();
    if (allowed[k]) {
      d = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) d += (q[j] - book(k, j)) * (q[j] - book(k, j));
    }
    if (!found || d < best) {
      best = d;
      arg = k;
      found = allowed[k] || found;
    }
  }
  return arg;
}

Tensor square_book() {
  Tensor b = Tensor::matrix(4, 2);
  b(1, 0) = 1;
  b(2, 1) = 1;
  b(3, 0) = 1;
  b(3, 1) = 1;
  return b;
}

}  // namespace

TEST(Partition, BasePresetRanges) {
  const auto t = PartitionTable::base16384();
  EXPECT_EQ(t.range(Domain::speech), (IndexRange{0, 4096}));
  EXPECT_EQ(t.range(Domain::vocal), (IndexRange{0, 8192}));
  EXPECT_EQ(t.range(Domain::music), (IndexRange{0, 16384}));
  EXPECT_EQ(t.range(Domain::other), (IndexRange{8192, 16384}));
  EXPECT_DOUBLE_EQ(t.bin_fraction(vq::ReportBin::speech), 0.25);
}

TEST(Partition, ExtendedPresetRanges) {
  const auto t = PartitionTable::extended20480();
  EXPECT_EQ(t.range(Domain::speech), (IndexRange{0, 8192}));
  EXPECT_EQ(t.range(Domain::vocal), (IndexRange{0, 12288}));
  EXPECT_EQ(t.range(Domain::music), (IndexRange{0, 20480}));
  EXPECT_EQ(t.range(Domain::other), (IndexRange{12288, 20480}));
  EXPECT_DOUBLE_EQ(t.bin_fraction(vq::ReportBin::speech), 0.40);
}

TEST(Partition, DeskPreset) {
  const auto t = PartitionTable::desk256();
  EXPECT_EQ(t.range(Domain::speech), (IndexRange{0, 64}));
  EXPECT_EQ(t.range(Domain::vocal), (IndexRange{0, 128}));
  EXPECT_EQ(t.range(Domain::music), (IndexRange{0, 256}));
  EXPECT_EQ(t.range(Domain::other), (IndexRange{128, 256}));
}

TEST(Partition, CustomTablesValidated) {
  EXPECT_THROW(PartitionTable::custom(100, {IndexRange{0, 60}, IndexRange{0, 50}, IndexRange{0, 100}, IndexRange{50, 100}}), ConfigError);
  EXPECT_THROW(PartitionTable::custom(100, {IndexRange{0, 25}, IndexRange{0, 50}, IndexRange{0, 100}, IndexRange{20, 100}}), ConfigError);
  EXPECT_THROW(PartitionTable::custom(100, {IndexRange{0, 25}, IndexRange{0, 50}, IndexRange{0, 120}, IndexRange{50, 100}}), ConfigError);
  const auto ok = PartitionTable::custom(100, {IndexRange{0, 10}, IndexRange{0, 70}, IndexRange{0, 100}, IndexRange{70, 100}});
  EXPECT_EQ(PartitionTable::from_json(ok.to_json()), ok);
  EXPECT_THROW(vq::parse_preset("huge"), ConfigError);
}

TEST(Partition, DomainMasks) {
  const auto base = PartitionTable::base16384();
  const auto speech = vq::domain_mask(base, Domain::speech);
  EXPECT_EQ(speech.count(), 4096u);
  EXPECT_TRUE(speech.contains(4095));
  EXPECT_FALSE(speech.contains(4096));
  EXPECT_EQ(vq::domain_mask(base, std::nullopt).count(), 16384u);
  const auto other = vq::domain_mask(PartitionTable::extended20480(), Domain::other);
  EXPECT_EQ(other.ranges().front(), (IndexRange{12288, 20480}));
}

TEST(Quantize, WorkedExamples) {
  const Tensor book = square_book();
  Tensor q = Tensor::matrix(1, 2);
  q(0, 0) = 0.9;
  q(0, 1) = 0.1;
  EXPECT_EQ(vq::nearest_codes(q, book, vq::IndexMask::full(4))[0], 1u);
  EXPECT_EQ(vq::nearest_codes(q, book, vq::IndexMask(4, {IndexRange{2, 4}}))[0], 3u);
  q(0, 0) = 0;
  q(0, 1) = 1;
  EXPECT_EQ(vq::nearest_codes(q, book, vq::IndexMask::full(4))[0], 2u);
  EXPECT_THROW(vq::nearest_codes(q, book, vq::IndexMask(4, {})), ConfigError);
}

TEST(Quantize, DuplicateRowsPickSmallerIndex) {
  Tensor book = Tensor::matrix(5, 3, 0.5);
  Tensor q = Tensor::matrix(1, 3, 0.4);
  EXPECT_EQ(vq::nearest_codes(q, book, vq::IndexMask::full(5))[0], 0u);
  EXPECT_EQ(vq::nearest_codes(q, book, vq::IndexMask(5, {IndexRange{3, 5}, IndexRange{1, 2}}))[0], 1u);
}

TEST(Quantize, AgreesWithBruteForceScan) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng() % 40, d = 1 + rng() % 6;
    Tensor book = uniform_tensor({k, d}, -1, 1, rng);
    // Coarse grid so exact ties occur.
    for (double& v : book.values()) v = std::round(v * 2.0) / 2.0;
    const auto lo = static_cast<std::uint32_t>(rng() % k);
    const auto hi = static_cast<std::uint32_t>(lo + 1 + rng() % (k - lo));
    const vq::IndexMask mask(k, {IndexRange{lo, hi}});
    std::vector<bool> allowed(k);
    for (std::uint32_t i = 0; i < k; ++i) allowed[i] = mask.contains(i);
    Tensor q = uniform_tensor({1, d}, -1, 1, rng);
    for (double& v : q.values()) v = std::round(v * 2.0) / 2.0;
    EXPECT_EQ(vq::nearest_codes(q, book, mask)[0], brute_force({q.values().begin(), q.values().end()}, book, allowed));
  }
}

TEST(Quantize, TrainingMaskAndInferenceFullCodebook) {
  std::mt19937_64 rng(2);
  vq::CodebookConfig cfg;
  const vq::FactorizedQuantizer quant(16, cfg, rng);
  const auto table = cfg.partition_table();
  for (Domain d : kAllDomains) {
    const auto q = quant.quantize(ag::Var(uniform_tensor({40, 16}, -1, 1, rng)), vq::domain_mask(table, d));
    for (auto i : q.indices) EXPECT_TRUE(table.range(d).contains(i));
  }
  const auto q = quant.quantize(ag::Var(uniform_tensor({400, 16}, -1, 1, rng)), vq::IndexMask::full(cfg.size));
  EXPECT_EQ(q.quantized_latents.shape(), (Shape{400, 16}));
  EXPECT_EQ(q.codes_lowdim.shape(), (Shape{400, 8}));
}

TEST(Quantize, StraightThroughContract) {
  std::mt19937_64 rng(3);
  const ag::Var z = ag::Var::parameter(uniform_tensor({3, 4}, -1, 1, rng));
  const ag::Var c(uniform_tensor({3, 4}, -1, 1, rng));
  const ag::Var out = ag::straight_through(z, c);
  EXPECT_EQ(out.value(), c.value());
  const Tensor seed = uniform_tensor({3, 4}, -1, 1, rng);
  ag::backward(out, seed);
  EXPECT_EQ(z.grad(), seed);
  EXPECT_THROW(ag::straight_through(z, ag::Var(Tensor::matrix(2, 4))), ShapeError);
}

TEST(Quantize, GradientsReachProjectionAndCodebook) {
  std::mt19937_64 rng(4);
  vq::CodebookConfig cfg;
  const vq::FactorizedQuantizer quant(16, cfg, rng);
  const ag::Var x = ag::Var::parameter(uniform_tensor({20, 16}, -1, 1, rng));
  const auto q = quant.quantize(x, vq::IndexMask::full(cfg.size));
  ag::backward(ag::add(ag::sum(ag::mul(q.quantized_latents, ag::Var(uniform_tensor({20, 16}, -1, 1, rng)))), quant.loss(q)));
  nn::ParameterList params;
  quant.collect(params, "vq");
  for (const auto& p : params) {
    ASSERT_TRUE(p.var.has_grad()) << p.name;
    EXPECT_GT(nn::grad_norm({p}), 0.0) << p.name;
  }
  EXPECT_GT(nn::grad_norm({{"x", x}}), 0.0);
}

TEST(QuantizerLoss, Values) {
  const ag::Var z(Tensor({1, 2}, std::vector<double>{1.0, 0.0}));
  const ag::Var c(Tensor({1, 2}, std::vector<double>{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(vq::quantizer_loss(z, c, 0.25).item(), 0.625);
  EXPECT_DOUBLE_EQ(vq::quantizer_loss(z, z, 0.25).item(), 0.0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i)
    EXPECT_GE(vq::quantizer_loss(ag::Var(uniform_tensor({2, 3}, -1, 1, rng)), ag::Var(uniform_tensor({2, 3}, -1, 1, rng)), 0.25).item(), 0.0);
}

TEST(QuantizerLoss, CommitmentAndCodebookGradientsSplit) {
  const ag::Var z = ag::Var::parameter(Tensor({1, 2}, std::vector<double>{1.0, 0.0}));
  const ag::Var c = ag::Var::parameter(Tensor({1, 2}, std::vector<double>{0.0, 0.0}));
  ag::backward(vq::quantizer_loss(z, c, 0.25));
  EXPECT_DOUBLE_EQ(z.grad()[0], 0.25);  // beta * 2 * (z - c) / 2
  EXPECT_DOUBLE_EQ(c.grad()[0], -1.0);
}

TEST(Stats, WorkedExampleAndDegenerate) {
  const std::vector<std::uint32_t> idx{100, 5000, 9000, 16000};
  const auto s = vq::codebook_stats(idx, PartitionTable::extended20480());
  EXPECT_DOUBLE_EQ(s.ratios[0], 0.5);
  EXPECT_DOUBLE_EQ(s.ratios[1], 0.25);
  EXPECT_DOUBLE_EQ(s.ratios[2], 0.25);
  EXPECT_NEAR(s.perplexity, 4.0, 1e-12);
  const std::vector<std::uint32_t> same(50, 7);
  const auto d = vq::codebook_stats(same, PartitionTable::base16384());
  EXPECT_NEAR(d.perplexity, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(d.utilization, 1.0 / 16384.0);
  const std::vector<std::uint32_t> bad{16384};
  EXPECT_THROW(vq::codebook_stats(bad, PartitionTable::base16384()), ConfigError);
}

TEST(DeadCodes, IdleCodesReseeded) {
  std::mt19937_64 rng(6);
  vq::CodebookConfig cfg;
  cfg.dead_code_reset = true;
  cfg.dead_code_steps = 10;
  vq::FactorizedQuantizer quant(16, cfg, rng);
  std::vector<std::uint32_t> all(cfg.size);
  std::iota(all.begin(), all.end(), 0u);
  quant.record_usage(all, 20);
  quant.record_usage({0, 1, 2}, 28);
  const Tensor queries = Tensor::matrix(3, 8, 0.7);
  EXPECT_EQ(quant.reset_dead_codes(25, queries, rng), 0u);
  EXPECT_EQ(quant.reset_dead_codes(31, queries, rng), cfg.size - 3);
  EXPECT_DOUBLE_EQ(quant.codebook().value()(5, 0), 0.7);
}
