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
#include <map>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "auv/codec/model.hpp"
#include "auv/vq/stats.hpp"

namespace auv::metrics {

/// Index-distribution table: one row per source-domain group, columns are the reporting bins.
struct ProbeReport {
  std::map<Domain, vq::CodebookStats> groups;
  std::map<Domain, std::size_t> clips;
  std::array<double, 3> baseline{};  ///< bin fractions of the codebook (uniform-guess ratios)

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [domain, stats] : groups) {
      nlohmann::json row = stats.to_json();
      row["group"] = std::string(domain_name(domain));
      row["clips"] = clips.contains(domain) ? clips.at(domain) : 0;
      rows.push_back(row);
    }
    nlohmann::json base;
    for (std::size_t b = 0; b < 3; ++b) base[std::string(vq::kReportBinNames[b])] = baseline[b];
    return {{"rows", rows}, {"uniform_baseline", base}};
  }
};

/// Builds the report from already-collected indices, grouped by source domain.
inline ProbeReport probe_from_indices(const std::map<Domain, std::vector<std::uint32_t>>& indices, const vq::PartitionTable& table,
                                      const std::map<Domain, std::size_t>& clips = {}) {
  if (indices.empty()) throw ConfigError("probe: no clips");
  ProbeReport r;
  for (std::size_t b = 0; b < 3; ++b) r.baseline[b] = table.bin_fraction(static_cast<vq::ReportBin>(b));
  for (const auto& [domain, idx] : indices) r.groups.emplace(domain, vq::codebook_stats(idx, table));
  r.clips = clips;
  return r;
}

/// Uniform random token indices over [0, K); the test hook standing in for an untrained model.
inline std::vector<std::uint32_t> uniform_indices(std::size_t n, std::size_t codebook_size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> dist(0, static_cast<std::uint32_t>(codebook_size - 1));
  std::vector<std::uint32_t> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

/// Encodes each clip with no domain mask and groups the tokens by the clip's label.
inline ProbeReport probe_codebook(const codec::CodecModel& model, const std::vector<AudioSegment>& clips) {
  if (clips.empty()) throw ConfigError("probe: empty manifest");
  std::map<Domain, std::vector<std::uint32_t>> indices;
  std::map<Domain, std::size_t> counts;
  for (const auto& clip : clips) {
    if (!clip.domain) throw ConfigError("probe: clip without a domain label");
    const auto tokens = model.tokenize(clip);
    auto& dst = indices[*clip.domain];
    dst.insert(dst.end(), tokens.begin(), tokens.end());
    ++counts[*clip.domain];
  }
  return probe_from_indices(indices, model.partition_table(), counts);
}

}  // namespace auv::metrics
