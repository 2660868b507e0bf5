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
#include <vector>

#include <nlohmann/json.hpp>

#include "auv/core/audio.hpp"
#include "auv/vq/stats.hpp"

namespace auv::metrics {

inline constexpr double kSiSnrCap = 60.0;

/// Scale-invariant SNR in dB after removing the mean of both signals, capped at
/// +60 dB (and floored at -60 dB for an estimate with no energy along the
/// reference). Inputs are trimmed to the shorter length.
inline double si_snr(std::span<const double> reference, std::span<const double> estimate) {
  const std::size_t n = std::min(reference.size(), estimate.size());
  if (n == 0) throw ConfigError("si_snr: empty input");
  double mr = 0.0, me = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mr += reference[i];
    me += estimate[i];
  }
  mr /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double rr = 0.0, re = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rr += (reference[i] - mr) * (reference[i] - mr);
    re += (reference[i] - mr) * (estimate[i] - me);
  }
  if (rr <= 0.0) throw ConfigError("si_snr: reference is zero after mean removal");
  const double alpha = re / rr;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = alpha * (reference[i] - mr);
    const double e = (estimate[i] - me) - s;
    target += s * s;
    noise += e * e;
  }
  if (target <= 0.0) return -kSiSnrCap;
  if (noise <= 0.0) return kSiSnrCap;
  return std::clamp(10.0 * std::log10(target / noise), -kSiSnrCap, kSiSnrCap);
}

inline double si_snr(const AudioSegment& reference, const AudioSegment& estimate) {
  if (reference.sample_rate != estimate.sample_rate) throw ConfigError("si_snr: sample rates differ");
  return si_snr(std::span<const double>(reference.samples), std::span<const double>(estimate.samples));
}

struct FileEval {
  std::string path;
  double mel_distance = 0.0;
  double si_snr = 0.0;
  bool si_snr_capped = false;
  double bitrate = 0.0;
  vq::CodebookStats codes;

  nlohmann::json to_json() const {
    return {{"path", path},         {"mel_distance", mel_distance}, {"si_snr", si_snr}, {"si_snr_capped", si_snr_capped},
            {"bitrate", bitrate},   {"codebook", codes.to_json()}};
  }
};

/// Per-file and aggregate reconstruction metrics. Aggregate mel distance and
/// SI-SNR are plain means over files; code statistics pool all tokens.
struct EvalReport {
  std::vector<FileEval> files;
  double mean_mel_distance = 0.0;
  double mean_si_snr = 0.0;
  double bitrate = 0.0;
  vq::CodebookStats codes;

  nlohmann::json to_json() const {
    nlohmann::json per_file = nlohmann::json::array();
    for (const auto& f : files) per_file.push_back(f.to_json());
    return {{"files", per_file},
            {"aggregate",
             {{"mel_distance", mean_mel_distance}, {"si_snr", mean_si_snr}, {"bitrate", bitrate}, {"codebook", codes.to_json()}}}};
  }
};

inline EvalReport aggregate(std::vector<FileEval> files, const std::vector<std::uint32_t>& all_tokens, const vq::PartitionTable& table) {
  if (files.empty()) throw ConfigError("eval: no files");
  EvalReport r;
  for (const auto& f : files) {
    r.mean_mel_distance += f.mel_distance;
    r.mean_si_snr += f.si_snr;
  }
  r.mean_mel_distance /= static_cast<double>(files.size());
  r.mean_si_snr /= static_cast<double>(files.size());
  r.bitrate = files.front().bitrate;
  r.codes = vq::codebook_stats(all_tokens, table);
  r.files = std::move(files);
  return r;
}

}  // namespace auv::metrics
