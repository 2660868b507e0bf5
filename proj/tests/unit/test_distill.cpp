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
#include <fstream>
#include <random>

#include "auv/distill/loss.hpp"
#include "auv/distill/teacher.hpp"
#include "auv/train/optim.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace auv;
using namespace auv::distill;

namespace {

Tensor rows(std::initializer_list<std::initializer_list<double>> r) {
  Tensor t = Tensor::matrix(r.size(), r.begin()->size());
  std::size_t i = 0;
  for (const auto& row : r)
    for (double v : row) t[i++] = v;
  return t;
}

double loss_of(const Tensor& s, const Tensor& h) { return evaluate_distill_loss(s, h).sum; }

}  // namespace

TEST(DistillLoss, IdenticalUnitVectors) {
  const Tensor s = rows({{0.6, 0.8}});
  EXPECT_NEAR(loss_of(s, s), 0.313262, 1e-6);
  EXPECT_NEAR(loss_of(s, s), per_frame_lower_bound(), 1e-15);
}

TEST(DistillLoss, OrthogonalVectors) {
  EXPECT_NEAR(loss_of(rows({{1.0, 0.0}}), rows({{0.0, 1.0}})), 1.0 + std::log(2.0), 1e-6);
}

TEST(DistillLoss, SumAndMeanOverFrames) {
  const Tensor s = rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  const Tensor h = rows({{1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}});
  const auto v = evaluate_distill_loss(s, h);
  const double expected = 2.0 * std::log1p(std::exp(-1.0)) + 1.0 + std::log(2.0);
  EXPECT_NEAR(v.sum, expected, 1e-12);
  EXPECT_NEAR(v.mean, expected / 3.0, 1e-12);
}

TEST(DistillLoss, ZeroVectorsStayFinite) {
  const Tensor z = Tensor::matrix(2, 3);
  const Tensor h = rows({{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}});
  EXPECT_TRUE(std::isfinite(loss_of(z, h)));
  EXPECT_TRUE(std::isfinite(loss_of(h, z)));
  ag::Var s(z, true);
  ag::backward(distill_loss(s, ag::Var(h)));
  for (double g : s.grad().values()) EXPECT_TRUE(std::isfinite(g));
}

TEST(DistillLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> t_dist(1, 4), d_dist(1, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = t_dist(rng), d = d_dist(rng);
    const Tensor s = uniform_tensor({t, d}, -1, 1, rng);
    const Tensor h = uniform_tensor({t, d}, -1, 1, rng);
    const double err = auv::testing::gradient_error([&](const auto& in) { return distill_loss(in[0], ag::Var(h)); }, {s});
    EXPECT_LT(err, 1e-4) << "trial " << trial;
  }
}

TEST(DistillLoss, LowerBoundHoldsOnRandomPairs) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor s = uniform_tensor({3, 5}, -2, 2, rng);
    Tensor h = uniform_tensor({3, 5}, -2, 2, rng);
    for (std::size_t r = 0; r < 3; ++r) {
      double n = 0;
      for (double v : h.row(r)) n += v * v;
      for (double& v : h.row(r)) v /= std::sqrt(n);
    }
    EXPECT_GE(loss_of(s, h), 3.0 * per_frame_lower_bound() - 1e-12);
  }
}

TEST(DistillLoss, ShapeErrors) {
  EXPECT_THROW(loss_of(Tensor::matrix(2, 3), Tensor::matrix(3, 3)), ShapeError);
  EXPECT_THROW(loss_of(Tensor::matrix(0, 3), Tensor::matrix(0, 3)), ShapeError);
}

TEST(Routing, TeachersPerDomain) {
  const auto r = TeacherRouting::full_layout();
  EXPECT_EQ(route_teachers(Domain::speech, r).size(), 1u);
  EXPECT_EQ(route_teachers(Domain::speech, r)[0].name, "wavlm");
  EXPECT_EQ(route_teachers(Domain::vocal, r)[0].name, "muq");
  const auto music = route_teachers(Domain::music, r);
  ASSERT_EQ(music.size(), 2u);
  EXPECT_EQ(music[0].name, "muq");
  EXPECT_EQ(music[1].name, "beats");
  EXPECT_EQ(route_teachers(Domain::other, r)[0].name, "beats");
  for (Domain d : kAllDomains) EXPECT_GE(route_teachers(d, r).size(), 1u);
}

TEST(Routing, InvalidSpecRejected) {
  EXPECT_THROW(TeacherRouting({"a", 0, "", 50.0}, {"b", 4, "", 50.0}, {"c", 4, "", 50.0}), ConfigError);
  EXPECT_THROW(TeacherRouting({"a", 4, "", 0.0}, {"b", 4, "", 50.0}, {"c", 4, "", 50.0}), ConfigError);
  EXPECT_THROW(TeacherRouting({"", 4, "", 50.0}, {"b", 4, "", 50.0}, {"c", 4, "", 50.0}), ConfigError);
}

TEST(AlignFrames, IdentityAndDecimation) {
  std::mt19937_64 rng(23);
  const Tensor f = uniform_tensor({10, 3}, -1, 1, rng);
  EXPECT_EQ(align_frames(f, 10), f);
  const Tensor half = align_frames(f, 5);
  ASSERT_EQ(half.rows(), 5u);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(half(t, d), f(2 * t, d));
}

TEST(AlignFrames, ConstantFeaturesStayConstant) {
  Tensor f = Tensor::matrix(7, 2);
  f.fill(0.25);
  for (std::size_t target : {1u, 3u, 7u, 20u}) {
    const Tensor a = align_frames(f, target);
    EXPECT_EQ(a.rows(), target);
    for (double v : a.values()) EXPECT_EQ(v, 0.25);
  }
  EXPECT_THROW(align_frames(f, 0), ConfigError);
}

TEST(MockTeacher, DeterministicSeededAndFrameCount) {
  const TeacherSpec spec{"t", 16, "mock", 50.0};
  const auto audio = auv::testing::noise_like(16001, 16000, 1000, 3, 5);
  const MockTeacher a(spec, 7), b(spec, 7), c(spec, 8);
  const Tensor fa = a.features(audio);
  EXPECT_EQ(fa, b.features(audio));
  EXPECT_EQ(fa.rows(), 51u);
  EXPECT_EQ(fa.cols(), 16u);
  EXPECT_GT(max_abs_diff(fa, c.features(audio)), 0.1);
}

TEST(LearnerHeads, ShapesZeroInputAndIsolation) {
  std::mt19937_64 rng(24);
  const TeacherSpec a{"a", 6, "", 50.0}, b{"b", 9, "", 50.0};
  const LearnerHeads heads(4, {a, b}, rng);
  std::mt19937_64 xr(25);
  const ag::Var tap(uniform_tensor({5, 4}, -1, 1, xr));
  EXPECT_EQ(heads(tap, "a").shape(), (Shape{5, 6}));
  EXPECT_EQ(heads(tap, "b").shape(), (Shape{5, 9}));
  EXPECT_THROW(heads(tap, "c"), ConfigError);

  const Tensor before_b = heads(tap, "b").value();
  ag::Var wa = heads.head("a").weight();
  wa.mutable_value().fill(3.0);
  EXPECT_EQ(heads(tap, "b").value(), before_b);

  ag::Var ba = heads.head("a").bias();
  ba.mutable_value().fill(0.0);
  const Tensor zero_out = heads(ag::Var(Tensor::matrix(5, 4)), "a").value();
  for (double v : zero_out.values()) EXPECT_EQ(v, 0.0);

  nn::ParameterList params;
  heads.collect(params, "heads");
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0].name, "heads.a.weight");
  EXPECT_EQ(params[3].name, "heads.b.bias");
}

TEST(TeacherFeatures, FileRoundTripAndErrors) {
  const auto dir = auv::testing::temp_dir("auvf");
  std::mt19937_64 rng(26);
  const Tensor f = uniform_tensor({12, 5}, -1, 1, rng);
  const auto path = teacher_feature_path(dir / "clip.wav", "wavlm");
  EXPECT_EQ(path.filename().string(), "clip.wav.wavlm.auvf");
  write_teacher_features(path, f);
  const Tensor g = read_teacher_features(path);
  ASSERT_EQ(g.shape(), f.shape());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(g[i], static_cast<double>(static_cast<float>(f[i])));

  EXPECT_THROW(read_teacher_features(dir / "missing.auvf"), IoError);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  EXPECT_THROW(read_teacher_features(path), IoError);
  {
    std::ofstream junk(dir / "junk.auvf", std::ios::binary);
    junk << "NOPE0000000000000000";
  }
  EXPECT_THROW(read_teacher_features(dir / "junk.auvf"), IoError);
}

TEST(LearnerHeads, HeadOnlyTrainingApproachesLowerBound) {
  const TeacherSpec spec{"t", 16, "mock", 50.0};
  const MockTeacher teacher(spec, 31);
  const auto audio = auv::testing::vocal_like(16000, 16000, 220);
  const Tensor target = teacher.features(audio);
  // Fixed random features stand in for the decoder tap.
  std::mt19937_64 rng(32);
  const ag::Var tap(normal_tensor({target.rows(), 32}, 1.0, rng));
  const LearnerHeads heads(32, {spec}, rng);
  nn::ParameterList params;
  heads.collect(params, "head");
  train::AdamW opt(params, {.beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.0});
  const double bound = per_frame_lower_bound();
  auto loss = [&] { return distill_loss(heads(tap, "t"), ag::Var(target)); };
  const double initial = evaluate_distill_loss(heads(tap, "t").value(), target).mean - bound;
  for (int step = 0; step < 500; ++step) {
    opt.zero_grad();
    const ag::Var l = ag::scale(loss(), 1.0 / static_cast<double>(target.rows()));
    ag::backward(l);
    opt.step(1e-2);
  }
  const double final_gap = evaluate_distill_loss(heads(tap, "t").value(), target).mean - bound;
  EXPECT_LE(final_gap, 0.1 * initial) << "initial gap " << initial << " final gap " << final_gap;
}
