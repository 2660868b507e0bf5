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
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <string_view>

#include "auv/dsp/stft.hpp"

namespace auv::metrics {

enum class SpectrogramFormat { csv, pgm };

inline SpectrogramFormat parse_spectrogram_format(std::string_view s) {
  if (s == "csv") return SpectrogramFormat::csv;
  if (s == "pgm") return SpectrogramFormat::pgm;
  throw ConfigError("unknown spectrogram format '" + std::string(s) + "' (expected csv or pgm)");
}

/// log(|X| + eps), [frames, bins].
inline Tensor log_magnitude_spectrogram(const AudioSegment& audio, const dsp::StftConfig& cfg, double eps = 1e-5) {
  const auto spec = dsp::stft(audio, cfg);
  Tensor out = Tensor::matrix(spec.frames, spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t k = 0; k < spec.bins; ++k) out(t, k) = std::log(std::abs(spec.at(t, k)) + eps);
  return out;
}

/// One line per frame, one column per bin.
inline void write_spectrogram_csv(const Tensor& logmag, std::ostream& out) {
  out << std::setprecision(9);
  for (std::size_t t = 0; t < logmag.rows(); ++t) {
    for (std::size_t k = 0; k < logmag.cols(); ++k) out << (k ? "," : "") << logmag(t, k);
    out << '\n';
  }
}

/// Binary PGM, one column per frame and one row per bin (row 0 = DC), scaled to
/// [0, 255] between the global minimum and maximum. A flat input maps to 0.
inline void write_spectrogram_pgm(const Tensor& logmag, std::ostream& out) {
  const auto [lo_it, hi_it] = std::minmax_element(logmag.values().begin(), logmag.values().end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  const std::size_t width = logmag.rows();
  const std::size_t height = logmag.cols();
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::string row(width, '\0');
  for (std::size_t k = 0; k < height; ++k) {
    for (std::size_t t = 0; t < width; ++t) {
      const double v = span > 0 ? (logmag(t, k) - lo) / span * 255.0 : 0.0;
      row[t] = static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0))));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

inline void write_spectrogram(const Tensor& logmag, const std::filesystem::path& path, SpectrogramFormat format) {
  std::ofstream out(path, format == SpectrogramFormat::pgm ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write spectrogram: " + path.string());
  if (format == SpectrogramFormat::csv) write_spectrogram_csv(logmag, out);
  else write_spectrogram_pgm(logmag, out);
}

}  // namespace auv::metrics
