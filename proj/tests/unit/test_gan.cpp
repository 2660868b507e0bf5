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
#include <random>

#include "auv/gan/discriminators.hpp"
#include "auv/gan/losses.hpp"
#include "fixtures.hpp"

using namespace auv;
using namespace auv::gan;

namespace {

std::vector<DiscriminatorOutput> constant_scores(const std::vector<double>& values) {
  std::vector<DiscriminatorOutput> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    DiscriminatorOutput o;
    o.score = ag::Var(Tensor({1, 3 + i, 2}, values[i]), true);
    o.features = {o.score};
    out.push_back(o);
  }
  return out;
}

ag::Var wave_var(const AudioSegment& a) { return ag::Var(Tensor({a.size()}, a.samples)); }

double leaky(double x, double slope) { return x > 0 ? x : slope * x; }

}  // namespace

TEST(MelLoss, ZeroOnIdenticalAndSymmetric) {
  const auto a = auv::testing::vocal_like(8000, 16000, 220);
  const auto b = auv::testing::noise_like(8000, 16000, 2000, 4, 3);
  const dsp::MelConfig cfg;
  EXPECT_EQ(mel_loss(a, a, cfg), 0.0);
  EXPECT_DOUBLE_EQ(mel_loss(a, b, cfg), mel_loss(b, a, cfg));
  EXPECT_GT(mel_loss(a, b, cfg), 0.1);
}

TEST(MelLoss, SilenceVersusSineMatchesBandAverage) {
  const int sr = 16000;
  AudioSegment sine{std::vector<double>(16000), sr, std::nullopt};
  for (std::size_t i = 0; i < sine.size(); ++i) sine.samples[i] = std::sin(auv::testing::kTwoPi * 1000.0 * static_cast<double>(i) / sr);
  const AudioSegment silence{std::vector<double>(16000, 0.0), sr, std::nullopt};
  const dsp::MelConfig cfg;
  const Tensor log_e = dsp::mel_spectrogram(sine, cfg);
  double expected = 0.0;
  for (double v : log_e.values()) expected += std::abs(std::log(cfg.eps) - v);
  expected /= static_cast<double>(log_e.size());
  EXPECT_NEAR(mel_loss(silence, sine, cfg), expected, 1e-12);
}

TEST(MelLoss, TrimsToShorterAndRejectsMismatch) {
  const auto a = auv::testing::vocal_like(8000, 16000, 220);
  AudioSegment longer = a;
  longer.samples.resize(9000, 0.3);
  EXPECT_EQ(mel_loss(a, longer, dsp::MelConfig{}), 0.0);
  AudioSegment other_rate = a;
  other_rate.sample_rate = 22050;
  EXPECT_THROW(mel_loss(a, other_rate, dsp::MelConfig{}), ConfigError);
}

TEST(Discriminators, BankHasFiveMpdAndSixStftOutputs) {
  const DiscriminatorConfig cfg;
  EXPECT_EQ(cfg.periods, (std::vector<std::size_t>{2, 3, 5, 7, 11}));
  EXPECT_EQ(cfg.fft_sizes, (std::vector<std::size_t>{206, 334, 542, 876, 1418, 2296}));
  EXPECT_EQ(cfg.discriminator_count(), 11u);
  const DiscriminatorBank bank(DiscriminatorConfig{cfg.periods, cfg.fft_sizes, 2}, 1);
  const auto x = wave_var(auv::testing::noise_like(4000, 16000, 1500, 3, 1));
  EXPECT_EQ(bank.mpd_forward(x).size(), 5u);
  EXPECT_EQ(bank.msstft_forward(x).size(), 6u);
  EXPECT_EQ(bank(x).size(), 11u);
}

TEST(Discriminators, PeriodFoldPadsToMultiple) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  const auto folded = fold_by_period(ag::Var(Tensor({100}, v)), 3);
  EXPECT_EQ(folded.shape(), (Shape{1, 34, 3}));
  EXPECT_EQ(folded.value()[99], 100.0);
  EXPECT_EQ(folded.value()[100], 0.0);
  EXPECT_EQ(folded.value()[101], 0.0);
  EXPECT_EQ(fold_by_period(ag::Var(Tensor({99}, 1.0)), 3).shape(), (Shape{1, 33, 3}));
}

TEST(Discriminators, StftScalesHaveDistinctFrameCounts) {
  const DiscriminatorBank bank(DiscriminatorConfig{{2}, {206, 334, 542, 876, 1418, 2296}, 2}, 2);
  const auto x = wave_var(auv::testing::noise_like(16000, 16000, 1500, 3, 2));
  const auto outs = bank.msstft_forward(x);
  std::size_t previous = 0;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const std::size_t n = bank.stft_discriminators()[i].n_fft();
    const std::size_t hop = n / 4;
    EXPECT_EQ(bank.stft_discriminators()[i].stft_config().hop_length, hop);
    const auto& first = outs[i].features.front().value();
    EXPECT_EQ(first.shape()[1], (16000 + hop - 1) / hop) << n;
    EXPECT_EQ(first.shape()[2], n / 2 + 1) << n;
    EXPECT_NE(first.shape()[1], previous);
    previous = first.shape()[1];
  }
}

TEST(Discriminators, ZeroInputGivesBiasOnlyFirstLayer) {
  const DiscriminatorBank bank(DiscriminatorConfig{{2}, {206}, 3}, 3);
  const auto outs = bank.msstft_forward(ag::Var(Tensor({3000}, 0.0)));
  const auto params = bank.parameters();
  Tensor bias;
  for (const auto& p : params)
    if (p.name == "msstft.n206.conv1.bias") bias = p.var.value();
  ASSERT_EQ(bias.size(), 3u);
  const Tensor& f = outs[0].features[0].value();
  const std::size_t plane = f.shape()[1] * f.shape()[2];
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) ASSERT_DOUBLE_EQ(f[c * plane + i], leaky(bias[c], 0.2));
}

TEST(Discriminators, DeterministicForFixedSeed) {
  const DiscriminatorConfig cfg{{2, 3}, {206, 334}, 2};
  const DiscriminatorBank a(cfg, 4), b(cfg, 4);
  const auto x = wave_var(auv::testing::noise_like(3000, 16000, 1500, 3, 4));
  const auto oa = a(x), ob = b(x);
  for (std::size_t i = 0; i < oa.size(); ++i) EXPECT_EQ(oa[i].score.value(), ob[i].score.value());
  EXPECT_EQ(a.parameters().size(), b.parameters().size());
}

TEST(Discriminators, ConfigValidation) {
  EXPECT_THROW(DiscriminatorBank(DiscriminatorConfig{{}, {}, 2}, 1), ConfigError);
  EXPECT_THROW(DiscriminatorBank(DiscriminatorConfig{{2}, {4}, 2}, 1), ConfigError);
  EXPECT_THROW(DiscriminatorBank(DiscriminatorConfig{{2}, {206}, 0}, 1), ConfigError);
}

TEST(AdversarialLoss, LeastSquaresValues) {
  EXPECT_DOUBLE_EQ(discriminator_loss(constant_scores({1, 1, 1}), constant_scores({0, 0, 0})).item(), 0.0);
  EXPECT_DOUBLE_EQ(discriminator_loss(constant_scores({0.5, 0.5}), constant_scores({0.5, 0.5})).item(), 0.5);
  EXPECT_DOUBLE_EQ(generator_adversarial_loss(constant_scores({1, 1})).item(), 0.0);
  double previous = INFINITY;
  for (double d = -1.0; d <= 1.0; d += 0.125) {
    const double g = generator_adversarial_loss(constant_scores({d})).item();
    EXPECT_LT(g, previous);
    previous = g;
  }
}

TEST(AdversarialLoss, HingeValues) {
  EXPECT_DOUBLE_EQ(discriminator_loss(constant_scores({1}), constant_scores({-1}), GanObjective::hinge).item(), 0.0);
  EXPECT_DOUBLE_EQ(discriminator_loss(constant_scores({0}), constant_scores({0}), GanObjective::hinge).item(), 2.0);
  EXPECT_DOUBLE_EQ(generator_adversarial_loss(constant_scores({0.25}), GanObjective::hinge).item(), -0.25);
  EXPECT_EQ(parse_objective("lsgan"), GanObjective::least_squares);
  EXPECT_THROW(parse_objective("wgan"), ConfigError);
}

TEST(AdversarialLoss, CountMismatchThrows) {
  EXPECT_THROW(discriminator_loss(constant_scores({1, 1}), constant_scores({0})), ShapeError);
  EXPECT_THROW(generator_adversarial_loss({}), ShapeError);
}

TEST(AdversarialLoss, EvaluatesOnAudioPair) {
  const DiscriminatorBank bank(DiscriminatorConfig{{2, 3}, {206}, 2}, 5);
  const auto real = auv::testing::vocal_like(3000, 16000, 220);
  const auto fake = auv::testing::noise_like(3000, 16000, 1500, 3, 5);
  const auto l = adversarial_losses(real, fake, bank);
  EXPECT_TRUE(std::isfinite(l.disc_loss));
  EXPECT_GE(l.disc_loss, 0.0);
  EXPECT_GE(l.gen_loss, 0.0);
}

TEST(FeatureMatching, ZeroOffsetAndNonnegative) {
  const auto real = constant_scores({0.3, -0.2});
  EXPECT_EQ(feature_matching_loss(real, real).item(), 0.0);
  EXPECT_DOUBLE_EQ(feature_matching_loss(real, constant_scores({1.3, 0.8})).item(), 1.0);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DiscriminatorOutput> r(2), f(2);
    for (std::size_t i = 0; i < 2; ++i) {
      for (int l = 0; l < 3; ++l) {
        r[i].features.emplace_back(uniform_tensor({2, 4, 3}, -2, 2, rng));
        f[i].features.emplace_back(uniform_tensor({2, 4, 3}, -2, 2, rng));
      }
    }
    EXPECT_GE(feature_matching_loss(r, f).item(), 0.0);
  }
}

TEST(FeatureMatching, GradientFlowsOnlyToFake) {
  auto real = constant_scores({0.0});
  auto fake = constant_scores({1.0});
  ag::backward(feature_matching_loss(real, fake));
  EXPECT_FALSE(real[0].score.has_grad());
  EXPECT_TRUE(fake[0].score.has_grad());
  std::vector<DiscriminatorOutput> shallow(1);
  shallow[0].features = {ag::Var(Tensor({1, 2, 2}))};
  EXPECT_THROW(feature_matching_loss(real, shallow), ShapeError);
}

TEST(LossWeights, DefaultsAndValidation) {
  const LossWeights w;
  EXPECT_EQ(w.mel, 15.0);
  EXPECT_EQ(w.adv, 1.0);
  EXPECT_EQ(w.feat_match, 2.0);
  LossWeights bad;
  bad.adv = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}
