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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "auv/core/audio.hpp"
#include "auv/dsp/wav.hpp"
#include "auv/train/config.hpp"

namespace auv::train {

struct ManifestEntry {
  std::filesystem::path path;
  Domain domain = Domain::speech;
  std::optional<double> duration_sec;
};

/// JSON-lines manifest: {"path": ..., "domain": ..., "duration_sec": ...} per line.
/// Relative paths resolve against the manifest's directory. Blank lines are skipped.
inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest: " + manifest.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("path") || !j["path"].is_string() || j["path"].get<std::string>().empty())
      throw ConfigError(where + ": missing or empty \"path\"");
    if (!j.contains("domain") || !j["domain"].is_string()) throw ConfigError(where + ": missing \"domain\"");
    const auto domain_str = j["domain"].get<std::string>();
    const auto domain = parse_domain(domain_str);
    if (!domain) throw ConfigError(where + ": unknown domain '" + domain_str + "'");
    ManifestEntry e;
    e.path = j["path"].get<std::string>();
    if (e.path.is_relative()) e.path = manifest.parent_path() / e.path;
    e.domain = *domain;
    if (j.contains("duration_sec")) {
      if (!j["duration_sec"].is_number()) throw ConfigError(where + ": duration_sec must be a number");
      e.duration_sec = j["duration_sec"].get<double>();
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) spdlog::warn("manifest {} has no entries", manifest.string());
  return out;
}

struct BatchItem {
  AudioSegment audio;
  Domain domain = Domain::speech;
  std::filesystem::path source;
  std::size_t offset = 0;         ///< crop start within the source clip, in samples
  std::size_t source_length = 0;  ///< length of the uncropped clip
};

/// Random crop of at most `max_samples`; the start is a multiple of `align`.
/// Clips at or under the cap come back unchanged.
inline AudioSegment crop_segment(const AudioSegment& audio, std::size_t max_samples, std::mt19937_64& rng, std::size_t align,
                                 std::size_t* offset_out = nullptr) {
  if (offset_out) *offset_out = 0;
  if (audio.size() <= max_samples) return audio;
  const std::size_t slots = (audio.size() - max_samples) / align;
  const std::size_t offset = align * std::uniform_int_distribution<std::size_t>(0, slots)(rng);
  AudioSegment out;
  out.sample_rate = audio.sample_rate;
  out.domain = audio.domain;
  out.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     audio.samples.begin() + static_cast<std::ptrdiff_t>(offset + max_samples));
  if (offset_out) *offset_out = offset;
  return out;
}

/// Loads and caches manifest audio. Files that fail to load are remembered and skipped.
class ClipLoader {
 public:
  explicit ClipLoader(int sample_rate) : sample_rate_(sample_rate) {}

  const AudioSegment* get(const std::filesystem::path& path) {
    const std::string key = path.string();
    if (auto it = cache_.find(key); it != cache_.end()) return &it->second;
    if (failed_.contains(key)) return nullptr;
    try {
      AudioSegment a = dsp::load_wav(path, {.downmix = true});
      if (a.sample_rate != sample_rate_) {
        throw ConfigError("sample rate " + std::to_string(a.sample_rate) + " Hz, expected " + std::to_string(sample_rate_));
      }
      return &cache_.emplace(key, std::move(a)).first->second;
    } catch (const std::exception& e) {
      spdlog::warn("skipping {}: {}", key, e.what());
      failed_.insert(key);
      return nullptr;
    }
  }

  std::size_t failed_count() const noexcept { return failed_.size(); }

 private:
  int sample_rate_;
  std::map<std::string, AudioSegment> cache_;
  std::set<std::string> failed_;
};

/// Draws batch_size entries uniformly with replacement and crops each to the
/// segment cap. Unreadable files are skipped; it is an error if none can be read.
inline std::vector<BatchItem> make_batch(const std::vector<ManifestEntry>& entries, const TrainConfig& cfg, std::mt19937_64& rng,
                                         ClipLoader& loader) {
  if (entries.empty()) throw ConfigError("make_batch: empty manifest");
  std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
  std::vector<BatchItem> batch;
  while (batch.size() < cfg.batch_size) {
    const auto& entry = entries[pick(rng)];
    const AudioSegment* clip = loader.get(entry.path);
    if (!clip) {
      if (std::all_of(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return loader.get(e.path) == nullptr; }))
        throw IoError("make_batch: none of the manifest's audio files could be read");
      continue;
    }
    BatchItem item;
    item.audio = crop_segment(*clip, cfg.max_segment_samples(), rng, cfg.codec.stft.hop_length, &item.offset);
    item.audio.domain = entry.domain;
    item.domain = entry.domain;
    item.source = entry.path;
    item.source_length = clip->size();
    batch.push_back(std::move(item));
  }
  return batch;
}

}  // namespace auv::train
