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
#include <random>
#include <string>
#include <vector>

#include "auv/dsp/stft.hpp"
#include "auv/nn/layers.hpp"

namespace auv::gan {

/// Multi-period and multi-scale-STFT discriminator settings.
struct DiscriminatorConfig {
  std::vector<std::size_t> periods{2, 3, 5, 7, 11};
  std::vector<std::size_t> fft_sizes{206, 334, 542, 876, 1418, 2296};
  std::size_t channels = 8;  ///< base channel width; full-scale discriminators are far wider

  static DiscriminatorConfig stable_codec() { return {}; }
  /// Power-of-two FFT sizes, for comparison against the default set.
  static DiscriminatorConfig power_of_two() { return {{2, 3, 5, 7, 11}, {128, 256, 512, 1024, 2048, 4096}, 8}; }

  std::size_t discriminator_count() const { return periods.size() + fft_sizes.size(); }

  void validate() const {
    for (auto p : periods)
      if (p < 1) throw ConfigError("MPD periods must be positive");
    for (auto n : fft_sizes)
      if (n < 8) throw ConfigError("MS-STFT fft sizes must be at least 8");
    if (channels == 0) throw ConfigError("discriminator channels must be positive");
    if (periods.empty() && fft_sizes.empty()) throw ConfigError("discriminator bank needs at least one period or fft size");
  }

  bool operator==(const DiscriminatorConfig&) const = default;
};

struct DiscriminatorOutput {
  ag::Var score;                  ///< final score map
  std::vector<ag::Var> features;  ///< intermediate activations, input side first
};

/// Zero-pads wave[L] to a multiple of `period` and views it as [1, L'/period, period].
inline ag::Var fold_by_period(const ag::Var& wave, std::size_t period) {
  const std::size_t length = wave.size();
  const std::size_t padded = (length + period - 1) / period * period;
  Tensor out({1, padded / period, period});
  std::copy(wave.value().values().begin(), wave.value().values().end(), out.values().begin());
  return ag::make_result(std::move(out), {wave}, [length](ag::Node& self) {
    ag::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < length; ++i) g[i] += self.grad[i];
  });
}

/// Waveform folded by one period, convolved along time with (k, 1) kernels.
class PeriodDiscriminator {
 public:
  PeriodDiscriminator() = default;
  PeriodDiscriminator(std::size_t period, std::size_t channels, std::mt19937_64& rng) : period_(period) {
    const std::vector<std::size_t> widths{1, channels, 2 * channels, 4 * channels, 4 * channels};
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool last = i + 2 == widths.size();
      convs_.emplace_back(widths[i], widths[i + 1], 5, 1, ag::Conv2dGeometry{last ? 1U : 3U, 1, 2, 0}, rng);
    }
    post_ = nn::Conv2d(widths.back(), 1, 3, 1, ag::Conv2dGeometry{1, 1, 1, 0}, rng);
  }

  std::size_t period() const noexcept { return period_; }

  DiscriminatorOutput operator()(const ag::Var& wave) const {
    DiscriminatorOutput out;
    ag::Var h = fold_by_period(wave, period_);
    for (const auto& conv : convs_) {
      h = ag::leaky_relu(conv(h), 0.1);
      out.features.push_back(h);
    }
    out.score = post_(h);
    out.features.push_back(out.score);
    return out;
  }

  void collect(nn::ParameterList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(out, prefix + ".conv" + std::to_string(i + 1));
    post_.collect(out, prefix + ".post");
  }

 private:
  std::size_t period_ = 2;
  std::vector<nn::Conv2d> convs_;
  nn::Conv2d post_;
};

/// 2-D convolutions over the STFT magnitude at one resolution; hop = n_fft / 4.
class StftDiscriminator {
 public:
  StftDiscriminator() = default;
  StftDiscriminator(std::size_t n_fft, std::size_t channels, std::mt19937_64& rng) {
    stft_.n_fft = n_fft;
    stft_.win_length = n_fft;
    stft_.hop_length = n_fft / 4;
    stft_.window = dsp::WindowType::hann;
    stft_.center = true;
    convs_.emplace_back(1, channels, 3, 9, ag::Conv2dGeometry{1, 1, 1, 4}, rng);
    convs_.emplace_back(channels, channels, 3, 9, ag::Conv2dGeometry{1, 2, 1, 4}, rng);
    convs_.emplace_back(channels, channels, 3, 9, ag::Conv2dGeometry{1, 2, 1, 4}, rng);
    convs_.emplace_back(channels, channels, 3, 3, ag::Conv2dGeometry{1, 1, 1, 1}, rng);
    post_ = nn::Conv2d(channels, 1, 3, 3, ag::Conv2dGeometry{1, 1, 1, 1}, rng);
  }

  std::size_t n_fft() const noexcept { return stft_.n_fft; }
  const dsp::StftConfig& stft_config() const noexcept { return stft_; }

  DiscriminatorOutput operator()(const ag::Var& wave) const {
    DiscriminatorOutput out;
    const ag::Var mag = dsp::magnitude(dsp::stft(wave, stft_));
    ag::Var h = ag::reshape(mag, {1, mag.value().rows(), mag.value().cols()});
    for (const auto& conv : convs_) {
      h = ag::leaky_relu(conv(h), 0.2);
      out.features.push_back(h);
    }
    out.score = post_(h);
    out.features.push_back(out.score);
    return out;
  }

  void collect(nn::ParameterList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(out, prefix + ".conv" + std::to_string(i + 1));
    post_.collect(out, prefix + ".post");
  }

 private:
  dsp::StftConfig stft_;
  std::vector<nn::Conv2d> convs_;
  nn::Conv2d post_;
};

/// MPD followed by MS-STFT discriminators; outputs are ordered the same way.
class DiscriminatorBank {
 public:
  DiscriminatorBank(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    for (auto p : cfg_.periods) periods_.emplace_back(p, cfg_.channels, rng);
    for (auto n : cfg_.fft_sizes) scales_.emplace_back(n, cfg_.channels, rng);
  }
  DiscriminatorBank(const DiscriminatorBank&) = delete;
  DiscriminatorBank& operator=(const DiscriminatorBank&) = delete;
  DiscriminatorBank(DiscriminatorBank&&) = default;
  DiscriminatorBank& operator=(DiscriminatorBank&&) = default;

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  const std::vector<PeriodDiscriminator>& period_discriminators() const { return periods_; }
  const std::vector<StftDiscriminator>& stft_discriminators() const { return scales_; }

  std::vector<DiscriminatorOutput> mpd_forward(const ag::Var& wave) const {
    std::vector<DiscriminatorOutput> out;
    for (const auto& d : periods_) out.push_back(d(wave));
    return out;
  }

  std::vector<DiscriminatorOutput> msstft_forward(const ag::Var& wave) const {
    std::vector<DiscriminatorOutput> out;
    for (const auto& d : scales_) out.push_back(d(wave));
    return out;
  }

  std::vector<DiscriminatorOutput> operator()(const ag::Var& wave) const {
    auto out = mpd_forward(wave);
    auto more = msstft_forward(wave);
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    return out;
  }

  nn::ParameterList parameters() const {
    nn::ParameterList out;
    for (std::size_t i = 0; i < periods_.size(); ++i) periods_[i].collect(out, "mpd.p" + std::to_string(periods_[i].period()));
    for (std::size_t i = 0; i < scales_.size(); ++i) scales_[i].collect(out, "msstft.n" + std::to_string(scales_[i].n_fft()));
    return out;
  }

 private:
  DiscriminatorConfig cfg_;
  std::vector<PeriodDiscriminator> periods_;
  std::vector<StftDiscriminator> scales_;
};

}  // namespace auv::gan
