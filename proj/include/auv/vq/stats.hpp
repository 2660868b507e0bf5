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

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>

#include "auv/vq/partition.hpp"

namespace auv::vq {

struct CodebookStats {
  std::array<std::size_t, 3> bin_counts{};
  std::array<double, 3> ratios{};
  std::size_t total = 0;
  std::size_t distinct = 0;
  double utilization = 0.0;  ///< distinct / K
  double perplexity = 0.0;   ///< exp(entropy) of the empirical index distribution

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (std::size_t b = 0; b < 3; ++b) {
      j["ratios"][std::string(kReportBinNames[b])] = ratios[b];
      j["counts"][std::string(kReportBinNames[b])] = bin_counts[b];
    }
    j["total"] = total;
    j["distinct"] = distinct;
    j["utilization"] = utilization;
    j["perplexity"] = perplexity;
    return j;
  }
};

/// Reporting-bin ratios, utilisation and perplexity of a token sequence.
inline CodebookStats codebook_stats(std::span<const std::uint32_t> indices, const PartitionTable& table) {
  if (indices.empty()) throw ConfigError("codebook_stats: no indices");
  CodebookStats s;
  std::unordered_map<std::uint32_t, std::size_t> counts;
  for (auto i : indices) {
    s.bin_counts[static_cast<std::size_t>(table.bin_of(i))]++;
    counts[i]++;
  }
  s.total = indices.size();
  const auto n = static_cast<double>(s.total);
  for (std::size_t b = 0; b < 3; ++b) s.ratios[b] = static_cast<double>(s.bin_counts[b]) / n;
  s.distinct = counts.size();
  s.utilization = static_cast<double>(s.distinct) / static_cast<double>(table.codebook_size());
  double entropy = 0.0;
  for (const auto& [index, c] : counts) {
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  s.perplexity = std::exp(entropy);
  return s;
}

}  // namespace auv::vq
