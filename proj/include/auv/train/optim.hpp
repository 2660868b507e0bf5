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
#include <numbers>
#include <string>
#include <vector>

#include "auv/nn/layers.hpp"
#include "auv/train/config.hpp"

namespace auv::train {

/// Linear warmup 0 -> peak, cosine decay peak -> final, then constant final.
inline double lr_schedule(std::size_t step, double peak, double final_lr, std::size_t warmup, std::size_t cosine) {
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const std::size_t s = step - warmup;
  if (s < cosine) {
    const double progress = static_cast<double>(s) / static_cast<double>(cosine);
    return peak - (peak - final_lr) * 0.5 * (1.0 - std::cos(std::numbers::pi * progress));
  }
  return final_lr;
}

inline double lr_schedule(std::size_t step, const TrainConfig& cfg) {
  return lr_schedule(step, cfg.peak_lr, cfg.final_lr, cfg.warmup_updates, cfg.cosine_updates);
}

/// Shadow copy of a parameter list, updated as an exponential moving average.
struct EmaState {
  std::vector<std::string> names;
  std::vector<Tensor> shadow;
  double decay = 0.999;

  static EmaState from(const nn::ParameterList& params, double decay) {
    if (!(decay >= 0 && decay <= 1)) throw ConfigError("ema decay must lie in [0, 1]");
    EmaState s;
    s.decay = decay;
    for (const auto& p : params) {
      s.names.push_back(p.name);
      s.shadow.push_back(p.var.value());
    }
    return s;
  }

  /// Overwrites `params` with the shadow values.
  void copy_to(const nn::ParameterList& params) const {
    check(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      ag::Var v = params[i].var;
      v.mutable_value() = shadow[i];
    }
  }

  void check(const nn::ParameterList& params) const {
    if (params.size() != shadow.size()) {
      throw ShapeError("ema: " + std::to_string(shadow.size()) + " shadow tensors vs " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) shadow[i].check_same_shape(params[i].var.value(), "ema shadow");
  }
};

/// shadow <- decay * shadow + (1 - decay) * param, elementwise.
inline void ema_update(Tensor& shadow, const Tensor& param, double decay) {
  shadow.check_same_shape(param, "ema_update");
  for (std::size_t i = 0; i < shadow.size(); ++i) shadow[i] = decay * shadow[i] + (1.0 - decay) * param[i];
}

inline void ema_update(EmaState& state, const nn::ParameterList& params) {
  state.check(params);
  for (std::size_t i = 0; i < params.size(); ++i) ema_update(state.shadow[i], params[i].var.value(), state.decay);
}

/// Adam with decoupled weight decay.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.8;
    double beta2 = 0.99;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW() = default;
  AdamW(nn::ParameterList params, Options opt) : params_(std::move(params)), opt_(opt) {
    for (const auto& p : params_) {
      m_.push_back(Tensor::zeros_like(p.var.value()));
      v_.push_back(Tensor::zeros_like(p.var.value()));
    }
  }

  const nn::ParameterList& parameters() const noexcept { return params_; }
  std::size_t step_count() const noexcept { return t_; }

  void zero_grad() const { nn::zero_grads(params_); }

  /// Parameters without a gradient this step are left untouched.
  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ag::Var p = params_[i].var;
      if (!p.has_grad()) continue;
      const Tensor& g = p.grad();
      Tensor& w = p.mutable_value();
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] *= 1.0 - lr * opt_.weight_decay;
        m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
        v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
        w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
      }
    }
  }

  std::vector<Tensor>& first_moments() noexcept { return m_; }
  std::vector<Tensor>& second_moments() noexcept { return v_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  void set_step_count(std::size_t t) noexcept { t_ = t; }

 private:
  nn::ParameterList params_;
  Options opt_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace auv::train
