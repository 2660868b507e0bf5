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

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "auv/core/audio.hpp"
#include "auv/dsp/mel.hpp"
#include "auv/nn/layers.hpp"

namespace auv::distill {

struct TeacherSpec {
  std::string name;
  std::size_t feature_dim = 0;
  std::string layer_selection;  ///< e.g. "avg layers 13-24"
  double frame_rate = 50.0;

  void validate() const {
    if (name.empty()) throw ConfigError("teacher name must not be empty");
    if (feature_dim < 1) throw ConfigError("teacher '" + name + "': feature_dim must be at least 1");
    if (!(frame_rate > 0)) throw ConfigError("teacher '" + name + "': frame_rate must be positive");
  }
  bool operator==(const TeacherSpec&) const = default;
};

/// Which teachers supervise which domain. Music is supervised by both the
/// music teacher and the general-audio teacher.
class TeacherRouting {
 public:
  TeacherRouting(TeacherSpec speech_teacher, TeacherSpec music_teacher, TeacherSpec audio_teacher)
      : speech_(std::move(speech_teacher)), music_(std::move(music_teacher)), audio_(std::move(audio_teacher)) {
    speech_.validate();
    music_.validate();
    audio_.validate();
  }

  /// Descriptor layout of the full-scale setup: speech SSL layers 13-24, music SSL layers 5-10, all audio SSL layers.
  static TeacherRouting full_layout() {
    return {{"wavlm", 1024, "avg layers 13-24", 50.0}, {"muq", 1024, "avg layers 5-10", 50.0}, {"beats", 768, "avg all layers", 50.0}};
  }

  /// Three mock teachers of equal width for desk-scale training.
  static TeacherRouting mock_layout(std::size_t dim) {
    return {{"speech-teacher", dim, "mock", 50.0}, {"music-teacher", dim, "mock", 50.0}, {"audio-teacher", dim, "mock", 50.0}};
  }

  std::vector<TeacherSpec> route(Domain d) const {
    switch (d) {
      case Domain::speech: return {speech_};
      case Domain::vocal: return {music_};
      case Domain::music: return {music_, audio_};
      case Domain::other: return {audio_};
    }
    return {};
  }

  std::array<TeacherSpec, 3> teachers() const { return {speech_, music_, audio_}; }

 private:
  TeacherSpec speech_;
  TeacherSpec music_;
  TeacherSpec audio_;
};

inline std::vector<TeacherSpec> route_teachers(Domain domain, const TeacherRouting& routing) { return routing.route(domain); }

/// Nearest-frame resampling of [T', D] features to `target_frames` rows:
/// row t takes source row round(t * T' / target), clamped to T' - 1.
inline Tensor align_frames(const Tensor& features, std::size_t target_frames) {
  if (target_frames == 0) throw ConfigError("align_frames: target frame count must be positive");
  if (features.rank() != 2 || features.rows() == 0) throw ShapeError("align_frames: expected non-empty (T, D) features");
  const std::size_t src = features.rows();
  if (src == target_frames) return features;
  Tensor out = Tensor::matrix(target_frames, features.cols());
  for (std::size_t t = 0; t < target_frames; ++t) {
    const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(t) * static_cast<double>(src) / static_cast<double>(target_frames)));
    const auto row = features.row(std::min(idx, src - 1));
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return out;
}

/// Frozen stand-in for a pretrained SSL teacher: tanh of a fixed random affine
/// map of the normalised log-mel spectrogram. Same seed, same features.
class MockTeacher {
 public:
  MockTeacher(TeacherSpec spec, std::uint64_t seed, dsp::MelConfig mel = {}) : spec_(std::move(spec)), mel_(std::move(mel)) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    projection_ = normal_tensor({mel_.n_mels, spec_.feature_dim}, 1.0 / std::sqrt(static_cast<double>(mel_.n_mels)), rng);
    bias_ = normal_tensor({spec_.feature_dim}, 0.1, rng);
  }

  const TeacherSpec& spec() const noexcept { return spec_; }

  /// [ceil(len / hop), D] features.
  Tensor features(const AudioSegment& audio) const {
    Tensor mel = dsp::mel_spectrogram(audio, mel_);
    for (double& v : mel.values()) v = (v - kLogMelCenter) / kLogMelScale;
    Tensor out = Tensor::matrix(mel.rows(), spec_.feature_dim);
    auto m = as_matrix(out);
    m.noalias() = as_matrix(mel) * as_matrix(projection_);
    m.rowwise() += as_matrix(bias_).row(0);
    for (double& v : out.values()) v = std::tanh(v);
    return out;
  }

 private:
  static constexpr double kLogMelCenter = -4.0;
  static constexpr double kLogMelScale = 4.0;
  TeacherSpec spec_;
  dsp::MelConfig mel_;
  Tensor projection_;
  Tensor bias_;
};

/// One linear projection per teacher from the decoder tap to the teacher width.
class LearnerHeads {
 public:
  LearnerHeads() = default;
  LearnerHeads(std::size_t hidden, const std::vector<TeacherSpec>& teachers, std::mt19937_64& rng) {
    for (const auto& t : teachers) heads_.emplace_back(t.name, nn::Linear(hidden, t.feature_dim, rng));
  }

  ag::Var operator()(const ag::Var& tap, const std::string& teacher) const { return head(teacher)(tap); }

  const nn::Linear& head(const std::string& teacher) const {
    for (const auto& [name, lin] : heads_)
      if (name == teacher) return lin;
    throw ConfigError("no learner head for teacher '" + teacher + "'");
  }

  void collect(nn::ParameterList& out, const std::string& prefix) const {
    for (const auto& [name, lin] : heads_) lin.collect(out, prefix + "." + name);
  }

 private:
  std::vector<std::pair<std::string, nn::Linear>> heads_;
};

// ---- precomputed teacher features (.auvf) ----------------------------------
// 16-byte header: "AUVF", D (u32 LE), T' (u32 LE), reserved (u32, zero),
// followed by T' * D little-endian float32 values, row-major.

inline std::filesystem::path teacher_feature_path(const std::filesystem::path& audio, const std::string& teacher) {
  return std::filesystem::path(audio.string() + "." + teacher + ".auvf");
}

inline void write_teacher_features(const std::filesystem::path& path, const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("teacher features must be (T, D)");
  std::vector<unsigned char> out;
  auto put = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  };
  out.insert(out.end(), {'A', 'U', 'V', 'F'});
  put(static_cast<std::uint32_t>(features.cols()));
  put(static_cast<std::uint32_t>(features.rows()));
  put(0);
  for (double v : features.values()) {
    const auto f = static_cast<float>(v);
    std::uint32_t raw;
    std::memcpy(&raw, &f, sizeof raw);
    put(raw);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write teacher features: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

inline Tensor read_teacher_features(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open teacher features: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  auto get = [&bytes](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 16) | (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
  };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "AUVF", 4) != 0) throw IoError("bad magic in teacher features: " + path.string());
  const std::size_t dim = get(4);
  const std::size_t frames = get(8);
  if (dim == 0 || frames == 0) throw IoError("empty teacher features: " + path.string());
  if (bytes.size() != 16 + 4 * dim * frames) {
    throw IoError("teacher features " + path.string() + ": expected " + std::to_string(16 + 4 * dim * frames) + " bytes, found " +
                  std::to_string(bytes.size()));
  }
  Tensor out = Tensor::matrix(frames, dim);
  for (std::size_t i = 0; i < frames * dim; ++i) {
    const std::uint32_t raw = get(16 + 4 * i);
    float f;
    std::memcpy(&f, &raw, sizeof f);
    out[i] = static_cast<double>(f);
  }
  return out;
}

}  // namespace auv::distill
