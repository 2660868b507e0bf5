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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "auv/core/error.hpp"

namespace auv {

/// The four audio domains the nested codebook is partitioned over.
enum class Domain { speech = 0, vocal = 1, music = 2, other = 3 };

inline constexpr std::array<Domain, 4> kAllDomains{Domain::speech, Domain::vocal, Domain::music, Domain::other};

inline std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::speech: return "speech";
    case Domain::vocal: return "vocal";
    case Domain::music: return "music";
    case Domain::other: return "other";
  }
  return "unknown";
}

inline std::optional<Domain> parse_domain(std::string_view s) {
  for (Domain d : kAllDomains)
    if (domain_name(d) == s) return d;
  return std::nullopt;
}

/// Mono PCM samples at a declared rate, optionally tagged with a domain.
struct AudioSegment {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::optional<Domain> domain;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_sec() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
    for (double v : samples)
      if (!std::isfinite(v)) throw ConfigError("audio contains non-finite samples");
  }
};

}  // namespace auv
