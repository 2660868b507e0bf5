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
#include <random>
#include <string>
#include <vector>

#include "auv/nn/layers.hpp"

namespace auv::nn {

struct ConformerShape {
  std::size_t hidden = 128;
  std::size_t ffn_multiplier = 4;
  std::size_t heads = 4;
  std::size_t conv_kernel = 31;
};

/// Pre-norm position-wise feed-forward with Swish.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const ConformerShape& s, std::mt19937_64& rng)
      : norm_(s.hidden), up_(s.hidden, s.hidden * s.ffn_multiplier, rng), down_(s.hidden * s.ffn_multiplier, s.hidden, rng) {}

  ag::Var operator()(const ag::Var& x) const { return down_(ag::silu(up_(norm_(x)))); }

  void collect(ParameterList& out, const std::string& prefix) const {
    norm_.collect(out, prefix + ".norm");
    up_.collect(out, prefix + ".up");
    down_.collect(out, prefix + ".down");
  }

 private:
  LayerNorm norm_;
  Linear up_;
  Linear down_;
};

/// Pre-norm multi-head scaled dot-product self-attention without positional terms.
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(const ConformerShape& s, std::mt19937_64& rng)
      : heads_(s.heads),
        norm_(s.hidden),
        query_(s.hidden, s.hidden, rng),
        key_(s.hidden, s.hidden, rng),
        value_(s.hidden, s.hidden, rng),
        output_(s.hidden, s.hidden, rng) {
    if (s.hidden % s.heads != 0) throw ConfigError("hidden_size must be divisible by attention_heads");
  }

  ag::Var operator()(const ag::Var& x) const {
    const ag::Var h = norm_(x);
    const ag::Var q = query_(h);
    const ag::Var k = key_(h);
    const ag::Var v = value_(h);
    const std::size_t width = x.value().cols() / heads_;
    const double temperature = 1.0 / std::sqrt(static_cast<double>(width));
    std::vector<ag::Var> per_head;
    per_head.reserve(heads_);
    for (std::size_t i = 0; i < heads_; ++i) {
      const ag::Var qi = ag::slice_cols(q, i * width, width);
      const ag::Var ki = ag::slice_cols(k, i * width, width);
      const ag::Var vi = ag::slice_cols(v, i * width, width);
      const ag::Var weights = ag::softmax_rows(ag::scale(ag::matmul(qi, ag::transpose(ki)), temperature));
      per_head.push_back(ag::matmul(weights, vi));
    }
    return output_(heads_ == 1 ? per_head[0] : ag::concat_cols(per_head));
  }

  const Linear& output_projection() const { return output_; }

  void collect(ParameterList& out, const std::string& prefix) const {
    norm_.collect(out, prefix + ".norm");
    query_.collect(out, prefix + ".query");
    key_.collect(out, prefix + ".key");
    value_.collect(out, prefix + ".value");
    output_.collect(out, prefix + ".output");
  }

 private:
  std::size_t heads_ = 1;
  LayerNorm norm_;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear output_;
};

/// Pointwise -> GLU -> depthwise conv -> norm -> Swish -> pointwise.
/// Layer norm stands in for batch norm so inference does not depend on batch statistics.
class ConvolutionModule {
 public:
  ConvolutionModule() = default;
  ConvolutionModule(const ConformerShape& s, std::mt19937_64& rng)
      : norm_(s.hidden), pointwise_in_(s.hidden, 2 * s.hidden, rng), depthwise_norm_(s.hidden), pointwise_out_(s.hidden, s.hidden, rng) {
    if (s.conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.conv_kernel));
    depthwise_kernel_ = ag::Var::parameter(uniform_tensor({s.conv_kernel, s.hidden}, -bound, bound, rng));
    depthwise_bias_ = ag::Var::parameter(uniform_tensor({s.hidden}, -bound, bound, rng));
  }

  ag::Var operator()(const ag::Var& x) const {
    ag::Var h = ag::glu_cols(pointwise_in_(norm_(x)));
    h = ag::depthwise_conv_time(h, depthwise_kernel_, depthwise_bias_);
    return pointwise_out_(ag::silu(depthwise_norm_(h)));
  }

  void collect(ParameterList& out, const std::string& prefix) const {
    norm_.collect(out, prefix + ".norm");
    pointwise_in_.collect(out, prefix + ".pointwise_in");
    out.push_back({prefix + ".depthwise.kernel", depthwise_kernel_});
    out.push_back({prefix + ".depthwise.bias", depthwise_bias_});
    depthwise_norm_.collect(out, prefix + ".depthwise_norm");
    pointwise_out_.collect(out, prefix + ".pointwise_out");
  }

 private:
  LayerNorm norm_;
  Linear pointwise_in_;
  ag::Var depthwise_kernel_;
  ag::Var depthwise_bias_;
  LayerNorm depthwise_norm_;
  Linear pointwise_out_;
};

/// Macaron conformer block: x + FFN/2, + MHSA, + Conv, + FFN/2, then layer norm.
class ConformerBlock {
 public:
  ConformerBlock() = default;
  ConformerBlock(const ConformerShape& s, std::mt19937_64& rng)
      : ff_in_(s, rng), attention_(s, rng), conv_(s, rng), ff_out_(s, rng), final_norm_(s.hidden), hidden_(s.hidden) {}

  /// `attention_enabled = false` drops the attention residual branch (ablation probe).
  ag::Var operator()(const ag::Var& x, bool attention_enabled = true) const {
    if (x.value().rank() != 2 || x.value().cols() != hidden_) {
      throw ShapeError("conformer block expects (T, " + std::to_string(hidden_) + "), got " + shape_string(x.shape()));
    }
    ag::Var h = ag::add(x, ag::scale(ff_in_(x), 0.5));
    if (attention_enabled) h = ag::add(h, attention_(h));
    h = ag::add(h, conv_(h));
    h = ag::add(h, ag::scale(ff_out_(h), 0.5));
    return final_norm_(h);
  }

  const SelfAttention& attention() const { return attention_; }

  void collect(ParameterList& out, const std::string& prefix) const {
    ff_in_.collect(out, prefix + ".ff_in");
    attention_.collect(out, prefix + ".attention");
    conv_.collect(out, prefix + ".conv");
    ff_out_.collect(out, prefix + ".ff_out");
    final_norm_.collect(out, prefix + ".final_norm");
  }

 private:
  FeedForward ff_in_;
  SelfAttention attention_;
  ConvolutionModule conv_;
  FeedForward ff_out_;
  LayerNorm final_norm_;
  std::size_t hidden_ = 0;
};

}  // namespace auv::nn
