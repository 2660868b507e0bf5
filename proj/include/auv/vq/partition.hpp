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

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "auv/core/audio.hpp"
#include "auv/core/error.hpp"

namespace auv::vq {

/// Half-open index range [lo, hi).
struct IndexRange {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  std::size_t size() const noexcept { return hi > lo ? hi - lo : 0; }
  bool contains(std::uint32_t i) const noexcept { return i >= lo && i < hi; }
  bool within(const IndexRange& outer) const noexcept { return lo >= outer.lo && hi <= outer.hi; }
  bool overlaps(const IndexRange& other) const noexcept { return lo < other.hi && other.lo < hi; }
  bool operator==(const IndexRange&) const = default;
};

enum class PartitionPreset { base16384, extended20480, desk256, custom };

inline std::string_view preset_name(PartitionPreset p) {
  switch (p) {
    case PartitionPreset::base16384: return "base16384";
    case PartitionPreset::extended20480: return "extended20480";
    case PartitionPreset::desk256: return "desk256";
    case PartitionPreset::custom: return "custom";
  }
  return "unknown";
}

inline PartitionPreset parse_preset(std::string_view s) {
  for (auto p : {PartitionPreset::base16384, PartitionPreset::extended20480, PartitionPreset::desk256, PartitionPreset::custom})
    if (preset_name(p) == s) return p;
  throw ConfigError("unknown partition preset '" + std::string(s) + "'");
}

/// The three disjoint bins used for index-distribution reporting.
enum class ReportBin { speech = 0, vocal_other_than_speech = 1, other = 2 };
inline constexpr std::array<std::string_view, 3> kReportBinNames{"speech", "vocal_other_than_speech", "other"};

/// Per-domain index ranges over one nested codebook:
/// speech within vocal within music, with `other` disjoint from speech.
class PartitionTable {
 public:
  /// Validates nesting and that {speech, vocal minus speech, other} tile [0, K).
  static PartitionTable custom(std::size_t codebook_size, const std::array<IndexRange, 4>& ranges) {
    PartitionTable t;
    t.size_ = codebook_size;
    t.ranges_ = ranges;
    t.validate();
    return t;
  }

  static PartitionTable base16384() {
    return custom(16384, {IndexRange{0, 4096}, IndexRange{0, 8192}, IndexRange{0, 16384}, IndexRange{8192, 16384}});
  }
  static PartitionTable extended20480() {
    return custom(20480, {IndexRange{0, 8192}, IndexRange{0, 12288}, IndexRange{0, 20480}, IndexRange{12288, 20480}});
  }
  /// base16384 shrunk 64x for desk-scale runs.
  static PartitionTable desk256() {
    return custom(256, {IndexRange{0, 64}, IndexRange{0, 128}, IndexRange{0, 256}, IndexRange{128, 256}});
  }

  static PartitionTable from_preset(PartitionPreset preset) {
    switch (preset) {
      case PartitionPreset::base16384: return base16384();
      case PartitionPreset::extended20480: return extended20480();
      case PartitionPreset::desk256: return desk256();
      case PartitionPreset::custom: break;
    }
    throw ConfigError("custom partition presets need explicit ranges");
  }

  std::size_t codebook_size() const noexcept { return size_; }
  const IndexRange& range(Domain d) const { return ranges_[static_cast<std::size_t>(d)]; }
  const std::array<IndexRange, 4>& ranges() const noexcept { return ranges_; }

  std::array<IndexRange, 3> reporting_bins() const {
    const IndexRange& speech = range(Domain::speech);
    const IndexRange& vocal = range(Domain::vocal);
    return {speech, IndexRange{speech.hi, vocal.hi}, range(Domain::other)};
  }

  ReportBin bin_of(std::uint32_t index) const {
    if (index >= size_) throw ConfigError("index " + std::to_string(index) + " outside codebook of size " + std::to_string(size_));
    const auto bins = reporting_bins();
    if (bins[0].contains(index)) return ReportBin::speech;
    if (bins[1].contains(index)) return ReportBin::vocal_other_than_speech;
    return ReportBin::other;
  }

  /// Fraction of the codebook covered by a reporting bin (the uniform-guess baseline).
  double bin_fraction(ReportBin b) const {
    return static_cast<double>(reporting_bins()[static_cast<std::size_t>(b)].size()) / static_cast<double>(size_);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["codebook_size"] = size_;
    for (Domain d : kAllDomains) j[std::string(domain_name(d))] = {range(d).lo, range(d).hi};
    return j;
  }

  static PartitionTable from_json(const nlohmann::json& j) {
    std::array<IndexRange, 4> ranges;
    try {
      for (Domain d : kAllDomains) {
        const auto& r = j.at(std::string(domain_name(d)));
        ranges[static_cast<std::size_t>(d)] = {r.at(0).get<std::uint32_t>(), r.at(1).get<std::uint32_t>()};
      }
      return custom(j.at("codebook_size").get<std::size_t>(), ranges);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed partition table: ") + e.what());
    }
  }

  bool operator==(const PartitionTable&) const = default;

 private:
  PartitionTable() = default;

  void validate() const {
    if (size_ < 2) throw ConfigError("partition table: codebook size must be at least 2");
    for (Domain d : kAllDomains) {
      const auto& r = range(d);
      if (r.size() == 0 || r.hi > size_) {
        throw ConfigError("partition table: " + std::string(domain_name(d)) + " range [" + std::to_string(r.lo) + ", " +
                          std::to_string(r.hi) + ") is empty or exceeds codebook size " + std::to_string(size_));
      }
    }
    if (!range(Domain::speech).within(range(Domain::vocal))) throw ConfigError("partition table: speech range not nested in vocal range");
    if (!range(Domain::vocal).within(range(Domain::music))) throw ConfigError("partition table: vocal range not nested in music range");
    if (range(Domain::other).overlaps(range(Domain::speech))) throw ConfigError("partition table: other range overlaps speech range");
    const auto bins = reporting_bins();
    if (bins[0].lo != 0 || bins[1].hi != bins[2].lo || bins[2].hi != size_ || range(Domain::vocal).lo != range(Domain::speech).lo) {
      throw ConfigError("partition table: speech, vocal-minus-speech and other ranges must tile [0, K)");
    }
  }

  std::size_t size_ = 0;
  std::array<IndexRange, 4> ranges_{};
};

/// Set of admissible code indices, stored as disjoint sorted ranges.
class IndexMask {
 public:
  IndexMask() = default;
  IndexMask(std::size_t codebook_size, std::vector<IndexRange> ranges) : size_(codebook_size), ranges_(std::move(ranges)) {
    std::sort(ranges_.begin(), ranges_.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
      if (ranges_[i].hi > size_ || ranges_[i].lo > ranges_[i].hi) throw ConfigError("index mask range outside codebook");
      if (i > 0 && ranges_[i].lo < ranges_[i - 1].hi) throw ConfigError("index mask ranges overlap");
    }
  }

  static IndexMask full(std::size_t codebook_size) {
    return IndexMask(codebook_size, {IndexRange{0, static_cast<std::uint32_t>(codebook_size)}});
  }

  std::size_t codebook_size() const noexcept { return size_; }
  const std::vector<IndexRange>& ranges() const noexcept { return ranges_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& r : ranges_) n += r.size();
    return n;
  }
  bool empty() const { return count() == 0; }
  bool contains(std::uint32_t i) const {
    for (const auto& r : ranges_)
      if (r.contains(i)) return true;
    return false;
  }

 private:
  std::size_t size_ = 0;
  std::vector<IndexRange> ranges_;
};

/// Domain-aware mask at training time; the full codebook when the domain is unknown.
inline IndexMask domain_mask(const PartitionTable& table, std::optional<Domain> domain) {
  if (!domain) return IndexMask::full(table.codebook_size());
  return IndexMask(table.codebook_size(), {table.range(*domain)});
}

}  // namespace auv::vq
