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

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "auv/dsp/mel.hpp"
#include "auv/gan/discriminators.hpp"

namespace auv::gan {

enum class GanObjective { least_squares, hinge };

inline GanObjective parse_objective(std::string_view s) {
  if (s == "least_squares" || s == "lsgan") return GanObjective::least_squares;
  if (s == "hinge") return GanObjective::hinge;
  throw ConfigError("unknown GAN objective '" + std::string(s) + "'");
}
inline std::string_view objective_name(GanObjective o) { return o == GanObjective::hinge ? "hinge" : "least_squares"; }

/// Generator objective weights.
struct LossWeights {
  double mel = 15.0;
  double adv = 1.0;
  double feat_match = 2.0;
  double quantizer = 1.0;
  double distill = 1.0;

  void validate() const {
    for (double w : {mel, adv, feat_match, quantizer, distill})
      if (!std::isfinite(w) || w < 0) throw ConfigError("loss weights must be finite and non-negative");
  }
  bool operator==(const LossWeights&) const = default;
};

/// Mean absolute log-mel difference; both inputs are trimmed to the shorter length.
inline ag::Var mel_loss(const ag::Var& x, const ag::Var& y, const dsp::MelConfig& cfg, int sample_rate) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n == 0) throw ConfigError("mel_loss: empty input");
  auto trim = [n](const ag::Var& v) {
    if (v.size() == n) return v;
    Tensor t({n}, std::vector<double>(v.value().values().begin(), v.value().values().begin() + static_cast<std::ptrdiff_t>(n)));
    return ag::make_result(std::move(t), {v}, [n](ag::Node& self) {
      ag::Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    });
  };
  return ag::mean_abs_diff(dsp::log_mel(trim(x), cfg, sample_rate), dsp::log_mel(trim(y), cfg, sample_rate));
}

inline double mel_loss(const AudioSegment& x, const AudioSegment& y, const dsp::MelConfig& cfg) {
  if (x.sample_rate != y.sample_rate) throw ConfigError("mel_loss: sample rates differ");
  ag::NoGradGuard guard;
  return mel_loss(ag::Var(Tensor({x.size()}, x.samples)), ag::Var(Tensor({y.size()}, y.samples)), cfg, x.sample_rate).item();
}

/// Discriminator loss averaged over discriminators.
/// LSGAN: mean[(1 - D(real))^2] + mean[D(fake)^2]; hinge: mean[relu(1 - D(real))] + mean[relu(1 + D(fake))].
inline ag::Var discriminator_loss(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake,
                                  GanObjective objective = GanObjective::least_squares) {
  if (real.size() != fake.size() || real.empty()) throw ShapeError("discriminator_loss: output count mismatch");
  std::vector<ag::Var> terms;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const ag::Var& r = real[i].score;
    const ag::Var& f = fake[i].score;
    if (objective == GanObjective::least_squares) {
      terms.push_back(ag::add(ag::mean(ag::square(ag::add_scalar(ag::scale(r, -1.0), 1.0))), ag::mean(ag::square(f))));
    } else {
      terms.push_back(ag::add(ag::mean(ag::relu(ag::add_scalar(ag::scale(r, -1.0), 1.0))), ag::mean(ag::relu(ag::add_scalar(f, 1.0)))));
    }
  }
  return ag::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
}

/// Generator adversarial loss averaged over discriminators.
/// LSGAN: mean[(1 - D(fake))^2]; hinge: -mean[D(fake)].
inline ag::Var generator_adversarial_loss(const std::vector<DiscriminatorOutput>& fake,
                                          GanObjective objective = GanObjective::least_squares) {
  if (fake.empty()) throw ShapeError("generator_adversarial_loss: no outputs");
  std::vector<ag::Var> terms;
  for (const auto& f : fake) {
    terms.push_back(objective == GanObjective::least_squares
                        ? ag::mean(ag::square(ag::add_scalar(ag::scale(f.score, -1.0), 1.0)))
                        : ag::scale(ag::mean(f.score), -1.0));
  }
  return ag::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
}

/// Mean over discriminators of the mean per-layer L1 distance between feature maps.
inline ag::Var feature_matching_loss(const std::vector<DiscriminatorOutput>& real, const std::vector<DiscriminatorOutput>& fake) {
  if (real.size() != fake.size() || real.empty()) throw ShapeError("feature_matching_loss: output count mismatch");
  std::vector<ag::Var> per_disc;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const auto& rf = real[i].features;
    const auto& ff = fake[i].features;
    if (rf.size() != ff.size() || rf.empty()) throw ShapeError("feature_matching_loss: pyramid depth mismatch");
    std::vector<ag::Var> layers;
    for (std::size_t l = 0; l < rf.size(); ++l) {
      if (rf[l].shape() != ff[l].shape()) {
        throw ShapeError("feature_matching_loss: layer " + std::to_string(l) + " shape " + shape_string(rf[l].shape()) +
                         " vs " + shape_string(ff[l].shape()));
      }
      layers.push_back(ag::mean_abs_diff(ag::detach(rf[l]), ff[l]));
    }
    per_disc.push_back(ag::weighted_sum(layers, std::vector<double>(layers.size(), 1.0 / static_cast<double>(layers.size()))));
  }
  return ag::weighted_sum(per_disc, std::vector<double>(per_disc.size(), 1.0 / static_cast<double>(per_disc.size())));
}

struct AdversarialLosses {
  double disc_loss = 0.0;
  double gen_loss = 0.0;
};

/// Evaluates both adversarial objectives on one real/fake pair without recording gradients.
inline AdversarialLosses adversarial_losses(const AudioSegment& real, const AudioSegment& fake, const DiscriminatorBank& bank,
                                            GanObjective objective = GanObjective::least_squares) {
  ag::NoGradGuard guard;
  const auto r = bank(ag::Var(Tensor({real.size()}, real.samples)));
  const auto f = bank(ag::Var(Tensor({fake.size()}, fake.samples)));
  return {discriminator_loss(r, f, objective).item(), generator_adversarial_loss(f, objective).item()};
}

}  // namespace auv::gan
