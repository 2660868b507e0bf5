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

#include "auv/core/ops.hpp"

namespace auv::nn {

struct NamedParameter {
  std::string name;
  ag::Var var;
};

using ParameterList = std::vector<NamedParameter>;

inline void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    ag::Var v = p.var;
    v.zero_grad();
  }
}

inline double grad_norm(const ParameterList& params) {
  double s = 0.0;
  for (const auto& p : params)
    if (p.var.has_grad())
      for (double g : p.var.grad().values()) s += g * g;
  return std::sqrt(s);
}

/// y = x W + b, W stored [in, out]. Uniform +-1/sqrt(in) initialisation.
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight_ = ag::Var::parameter(uniform_tensor({in, out}, -bound, bound, rng));
    bias_ = ag::Var::parameter(uniform_tensor({out}, -bound, bound, rng));
  }

  ag::Var operator()(const ag::Var& x) const { return ag::linear(x, weight_, bias_); }

  std::size_t in_features() const { return weight_.value().rows(); }
  std::size_t out_features() const { return weight_.value().cols(); }
  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

  void collect(ParameterList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  ag::Var weight_;
  ag::Var bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t n)
      : gamma_(ag::Var::parameter(Tensor({n}, 1.0))), beta_(ag::Var::parameter(Tensor({n}, 0.0))) {}

  ag::Var operator()(const ag::Var& x) const { return ag::layer_norm(x, gamma_, beta_); }

  void collect(ParameterList& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

 private:
  ag::Var gamma_;
  ag::Var beta_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w,
         ag::Conv2dGeometry geometry, std::mt19937_64& rng)
      : geometry_(geometry) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel_h * kernel_w));
    weight_ = ag::Var::parameter(uniform_tensor({out_channels, in_channels, kernel_h, kernel_w}, -bound, bound, rng));
    bias_ = ag::Var::parameter(uniform_tensor({out_channels}, -bound, bound, rng));
  }

  ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, weight_, bias_, geometry_); }

  void collect(ParameterList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  ag::Var weight_;
  ag::Var bias_;
  ag::Conv2dGeometry geometry_;
};

}  // namespace auv::nn
