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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "auv/core/audio.hpp"
#include "auv/dsp/wav.hpp"

namespace auv::testing {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Sum of harmonics of a time-varying f0; `f0(t)` in Hz, `weight(k, f)` the amplitude of harmonic k at frequency f.
template <typename F0, typename Weight>
std::vector<double> harmonic_tone(std::size_t n, int sr, F0 f0, Weight weight, std::size_t harmonics) {
  std::vector<double> out(n, 0.0);
  std::vector<double> phase(harmonics, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f = f0(t);
    for (std::size_t k = 0; k < harmonics; ++k) {
      const double fk = f * static_cast<double>(k + 1);
      if (fk >= sr / 2.0) break;
      phase[k] += kTwoPi * fk / sr;
      out[i] += weight(k, fk) * std::sin(phase[k]);
    }
  }
  return out;
}

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0)
    for (double& v : x) v *= peak / m;
}

/// Gliding voiced tone with two formant bumps and a syllable-rate envelope.
inline AudioSegment speech_like(std::size_t n, int sr, double f_start, double f_end, double formant1, double formant2) {
  const double dur = static_cast<double>(n) / sr;
  auto x = harmonic_tone(
      n, sr, [&](double t) { return f_start + (f_end - f_start) * t / dur; },
      [&](std::size_t, double f) {
        return std::exp(-std::pow((f - formant1) / 250.0, 2)) + 0.6 * std::exp(-std::pow((f - formant2) / 400.0, 2)) + 0.02;
      },
      40);
  for (std::size_t i = 0; i < n; ++i) x[i] *= 0.55 + 0.45 * std::sin(kTwoPi * 4.0 * static_cast<double>(i) / sr);
  normalize_peak(x, 0.5);
  return {x, sr, Domain::speech};
}

/// Sustained sung note with vibrato.
inline AudioSegment vocal_like(std::size_t n, int sr, double f0) {
  auto x = harmonic_tone(
      n, sr, [&](double t) { return f0 * (1.0 + 0.03 * std::sin(kTwoPi * 5.5 * t)); },
      [&](std::size_t k, double f) { return std::pow(0.7, static_cast<double>(k)) * (1.0 + std::exp(-std::pow((f - 2800.0) / 500.0, 2))); },
      30);
  normalize_peak(x, 0.5);
  return {x, sr, Domain::vocal};
}

/// Plucked notes: decaying harmonic tones starting at the given onsets.
inline AudioSegment music_like(std::size_t n, int sr, const std::vector<double>& notes, const std::vector<double>& onsets) {
  std::vector<double> x(n, 0.0);
  for (std::size_t j = 0; j < notes.size(); ++j) {
    const auto start = static_cast<std::size_t>(onsets[j] * sr);
    for (std::size_t i = start; i < n; ++i) {
      const double t = static_cast<double>(i - start) / sr;
      double v = 0.0;
      for (int k = 1; k <= 8; ++k) v += std::pow(0.55, k - 1) * std::sin(kTwoPi * notes[j] * k * t) * std::exp(-3.0 * k * t);
      x[i] += v;
    }
  }
  normalize_peak(x, 0.5);
  return {x, sr, Domain::music};
}

/// Band-limited noise bursts (two-pole resonator over white noise).
inline AudioSegment noise_like(std::size_t n, int sr, double center_hz, double burst_hz, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double r = 0.97;
  const double c = 2.0 * r * std::cos(kTwoPi * center_hz / sr);
  std::vector<double> x(n, 0.0);
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = g(rng) + c * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    const double env = 0.5 + 0.5 * std::cos(kTwoPi * burst_hz * static_cast<double>(i) / sr);
    x[i] = y * env;
  }
  normalize_peak(x, 0.5);
  return {x, sr, Domain::other};
}

/// Eight one-second clips, two per domain, in speech/vocal/music/other order.
inline std::vector<AudioSegment> smoke_clips(int sr = 16000, std::size_t n = 16000) {
  return {speech_like(n, sr, 110, 150, 700, 1200),
          speech_like(n, sr, 190, 240, 400, 2300),
          vocal_like(n, sr, 220),
          vocal_like(n, sr, 330),
          music_like(n, sr, {261.63, 329.63, 392.0}, {0.0, 0.25, 0.5}),
          music_like(n, sr, {196.0, 293.66, 440.0, 587.33}, {0.0, 0.1, 0.4, 0.7}),
          noise_like(n, sr, 1500, 3, 11),
          noise_like(n, sr, 4000, 7, 12)};
}

/// Writes clips as WAV files plus a JSON-lines manifest; returns the manifest path.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir, const std::vector<AudioSegment>& clips) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::string name = "clip" + std::to_string(i) + "_" + std::string(domain_name(*clips[i].domain)) + ".wav";
    dsp::write_wav(clips[i], dir / name);
    out << R"({"path": ")" << name << R"(", "domain": ")" << domain_name(*clips[i].domain) << R"(", "duration_sec": )"
        << clips[i].duration_sec() << "}\n";
  }
  return manifest;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("auv_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace auv::testing
