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

#include <cmath>
#include <string>
#include <vector>

#include "auv/core/ops.hpp"
#include "auv/dsp/stft.hpp"

namespace auv::dsp {

struct MelConfig {
  StftConfig stft;
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double eps = 1e-5;

  void validate(int sample_rate) const {
    stft.validate();
    if (n_mels == 0) throw ConfigError("mel: n_mels must be positive");
    if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
      throw ConfigError("mel: invalid frequency range [" + std::to_string(f_min) + ", " + std::to_string(f_max) +
                        "] for sample rate " + std::to_string(sample_rate));
    }
    if (!(eps > 0.0)) throw ConfigError("mel: eps must be positive");
  }

  bool operator==(const MelConfig&) const = default;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Edge frequencies of the triangular filters: n_mels + 2 points, band m spans [edges[m], edges[m+2]].
inline std::vector<double> mel_band_edges(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min);
  const double hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  return edges;
}

/// Triangular HTK-scale filterbank, [bins, n_mels], unnormalised.
inline Tensor mel_filterbank(const MelConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const auto edges = mel_band_edges(cfg);
  const std::size_t bins = cfg.stft.bins();
  Tensor fb = Tensor::matrix(bins, cfg.n_mels);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.stft.n_fft);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      const double rise = (f - edges[m]) / (edges[m + 1] - edges[m]);
      const double fall = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      fb(k, m) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

/// log(mel magnitude + eps), differentiable in the waveform. wave[L] -> [frames, n_mels].
inline ag::Var log_mel(const ag::Var& wave, const MelConfig& cfg, int sample_rate) {
  const ag::Var fb(mel_filterbank(cfg, sample_rate));
  return ag::log(ag::add_scalar(ag::matmul(magnitude(stft(wave, cfg.stft)), fb), cfg.eps));
}

/// Log-mel matrix [frames, n_mels] of a segment.
inline Tensor mel_spectrogram(const AudioSegment& segment, const MelConfig& cfg) {
  if (segment.empty()) throw ConfigError("mel_spectrogram: empty audio segment");
  ag::NoGradGuard no_grad;
  return log_mel(ag::Var(Tensor({segment.size()}, segment.samples)), cfg, segment.sample_rate).value();
}

}  // namespace auv::dsp
