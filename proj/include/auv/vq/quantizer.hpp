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
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "auv/core/ops.hpp"
#include "auv/nn/layers.hpp"
#include "auv/vq/partition.hpp"

namespace auv::vq {

struct CodebookConfig {
  std::size_t size = 256;
  std::size_t code_dim = 8;
  PartitionPreset preset = PartitionPreset::desk256;
  std::optional<PartitionTable> custom_table;
  bool normalize_codes = true;
  double commitment_beta = 0.25;
  bool dead_code_reset = false;
  std::size_t dead_code_steps = 1000;

  PartitionTable partition_table() const {
    PartitionTable t = preset == PartitionPreset::custom
                           ? (custom_table ? *custom_table : throw ConfigError("custom preset without a partition table"))
                           : PartitionTable::from_preset(preset);
    if (t.codebook_size() != size) {
      throw ConfigError("codebook size " + std::to_string(size) + " does not match partition preset '" +
                        std::string(preset_name(preset)) + "' (K=" + std::to_string(t.codebook_size()) + ")");
    }
    return t;
  }

  void validate() const {
    if (code_dim < 1) throw ConfigError("code_dim must be at least 1");
    if (commitment_beta < 0) throw ConfigError("commitment_beta must be non-negative");
    (void)partition_table();
  }
};

/// Index of the nearest admissible code by squared Euclidean distance, per
/// query row. Ties go to the smallest index.
inline std::vector<std::uint32_t> nearest_codes(const Tensor& queries, const Tensor& codebook, const IndexMask& mask) {
  if (mask.empty()) throw ConfigError("quantize: empty index mask");
  if (queries.cols() != codebook.cols()) {
    throw ShapeError("quantize: query dim " + std::to_string(queries.cols()) + " vs code dim " + std::to_string(codebook.cols()));
  }
  if (mask.codebook_size() != codebook.rows()) throw ShapeError("quantize: mask built for a different codebook size");
  const std::size_t dim = codebook.cols();
  std::vector<std::uint32_t> out(queries.rows());
  for (std::size_t t = 0; t < queries.rows(); ++t) {
    const auto q = queries.row(t);
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_index = mask.ranges().front().lo;
    for (const auto& r : mask.ranges()) {
      for (std::uint32_t k = r.lo; k < r.hi; ++k) {
        const double* c = codebook.data() + static_cast<std::size_t>(k) * dim;
        double d = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double diff = q[j] - c[j];
          d += diff * diff;
        }
        if (d < best) {
          best = d;
          best_index = k;
        }
      }
    }
    out[t] = best_index;
  }
  return out;
}

/// beta * |z - sg(c)|^2 + |sg(z) - c|^2, averaged over frames and dimensions.
inline ag::Var quantizer_loss(const ag::Var& latents_lowdim, const ag::Var& codes, double beta) {
  const ag::Var commitment = ag::mean(ag::square(ag::sub(latents_lowdim, ag::detach(codes))));
  const ag::Var codebook = ag::mean(ag::square(ag::sub(ag::detach(latents_lowdim), codes)));
  return ag::add(ag::scale(commitment, beta), codebook);
}

struct QuantizedSequence {
  std::vector<std::uint32_t> indices;
  ag::Var latents_lowdim;  ///< projected (and normalised) queries, [T, code_dim]
  ag::Var codes_lowdim;    ///< selected codes, [T, code_dim]
  ag::Var straight_through;  ///< codes in the forward pass, identity gradient to the queries
  ag::Var quantized_latents;  ///< back-projected decoder input, [T, hidden]
};

/// Single-layer factorised vector quantiser over one nested codebook.
class FactorizedQuantizer {
 public:
  FactorizedQuantizer() = default;
  FactorizedQuantizer(std::size_t hidden, const CodebookConfig& cfg, std::mt19937_64& rng)
      : cfg_(cfg), down_(hidden, cfg.code_dim, rng), up_(cfg.code_dim, hidden, rng) {
    cfg.validate();
    const double bound = 1.0 / static_cast<double>(cfg.size);
    codebook_ = ag::Var::parameter(uniform_tensor({cfg.size, cfg.code_dim}, -bound, bound, rng));
    last_used_.assign(cfg.size, 0);
  }

  const CodebookConfig& config() const noexcept { return cfg_; }
  const ag::Var& codebook() const noexcept { return codebook_; }

  /// Codebook rows as used for lookup (L2-normalised when configured).
  Tensor lookup_table() const {
    if (!cfg_.normalize_codes) return codebook_.value();
    ag::NoGradGuard guard;
    return ag::l2_normalize_rows(ag::Var(codebook_.value())).value();
  }

  /// Projects latents to the code space; the masked nearest code is selected per frame.
  QuantizedSequence quantize(const ag::Var& latents, const IndexMask& mask) const {
    QuantizedSequence q;
    ag::Var z = down_(latents);
    if (cfg_.normalize_codes) z = ag::l2_normalize_rows(z);
    q.indices = nearest_codes(z.value(), lookup_table(), mask);
    ag::Var codes = ag::gather_rows(codebook_, q.indices);
    if (cfg_.normalize_codes) codes = ag::l2_normalize_rows(codes);
    q.latents_lowdim = z;
    q.codes_lowdim = codes;
    q.straight_through = ag::straight_through(z, codes);
    q.quantized_latents = up_(q.straight_through);
    return q;
  }

  /// Decoder input for known tokens.
  ag::Var embed(const std::vector<std::uint32_t>& indices) const {
    for (auto i : indices)
      if (i >= cfg_.size) throw ConfigError("token " + std::to_string(i) + " outside codebook of size " + std::to_string(cfg_.size));
    ag::Var codes = ag::gather_rows(codebook_, indices);
    if (cfg_.normalize_codes) codes = ag::l2_normalize_rows(codes);
    return up_(codes);
  }

  ag::Var loss(const QuantizedSequence& q) const {
    return quantizer_loss(q.latents_lowdim, q.codes_lowdim, cfg_.commitment_beta);
  }

  /// Marks codes as used at `step`.
  void record_usage(const std::vector<std::uint32_t>& indices, std::size_t step) {
    for (auto i : indices) last_used_[i] = step;
  }

  /// Re-seeds codes idle for more than dead_code_steps with random recent
  /// query vectors. Returns the number of codes reset.
  std::size_t reset_dead_codes(std::size_t step, const Tensor& recent_queries, std::mt19937_64& rng) {
    if (!cfg_.dead_code_reset || recent_queries.rows() == 0) return 0;
    std::uniform_int_distribution<std::size_t> pick(0, recent_queries.rows() - 1);
    std::size_t count = 0;
    Tensor& table = codebook_.mutable_value();
    for (std::size_t k = 0; k < cfg_.size; ++k) {
      if (step - last_used_[k] <= cfg_.dead_code_steps || step < last_used_[k]) continue;
      const auto src = recent_queries.row(pick(rng));
      std::copy(src.begin(), src.end(), table.row(k).begin());
      last_used_[k] = step;
      ++count;
    }
    return count;
  }

  void collect(nn::ParameterList& out, const std::string& prefix) const {
    down_.collect(out, prefix + ".down");
    up_.collect(out, prefix + ".up");
    out.push_back({prefix + ".codebook", codebook_});
  }

 private:
  CodebookConfig cfg_;
  nn::Linear down_;
  nn::Linear up_;
  ag::Var codebook_;
  std::vector<std::size_t> last_used_;
};

}  // namespace auv::vq
