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
#include <vector>

#include "auv/core/ops.hpp"

namespace auv::distill {

struct DistillLossValue {
  double sum = 0.0;   ///< summed over frames
  double mean = 0.0;  ///< per-frame mean
};

/// Lower bound of the per-frame loss, reached when prediction equals a unit-norm target: log(1 + e^-1).
inline double per_frame_lower_bound() { return std::log1p(std::exp(-1.0)); }

/// sum_t [ |s_t - h_t|_1 / D - log sigmoid(cos(s_t, h_t)) ], differentiable in the
/// student predictions `s` only; teacher targets `h` are constants. Vector norms in
/// the cosine are clamped below at `eps`.
inline ag::Var distill_loss(const ag::Var& s, const ag::Var& h, double eps = 1e-8) {
  s.value().check_same_shape(h.value(), "distill_loss");
  if (s.value().rank() != 2 || s.value().rows() == 0 || s.value().cols() == 0) {
    throw ShapeError("distill_loss: expected non-empty (T, D) inputs, got " + shape_string(s.shape()));
  }
  const std::size_t frames = s.value().rows();
  const std::size_t dim = s.value().cols();
  std::vector<double> cosines(frames), s_norm(frames), h_norm(frames);
  double total = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto st = s.value().row(t);
    const auto ht = h.value().row(t);
    double l1 = 0.0, dot = 0.0, ss = 0.0, hh = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      l1 += std::abs(st[d] - ht[d]);
      dot += st[d] * ht[d];
      ss += st[d] * st[d];
      hh += ht[d] * ht[d];
    }
    s_norm[t] = std::max(std::sqrt(ss), eps);
    h_norm[t] = std::max(std::sqrt(hh), eps);
    cosines[t] = dot / (s_norm[t] * h_norm[t]);
    // -log sigmoid(c) = softplus(-c)
    const double c = cosines[t];
    total += l1 / static_cast<double>(dim) + (c > 0 ? std::log1p(std::exp(-c)) : -c + std::log1p(std::exp(c)));
  }
  return ag::make_result(Tensor::scalar(total), {s},
                         [hv = h.value(), cosines = std::move(cosines), s_norm = std::move(s_norm), h_norm = std::move(h_norm),
                          eps, dim](ag::Node& self) {
                           ag::Node& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           Tensor& g = p.grad_buffer();
                           const double upstream = self.grad[0];
                           for (std::size_t t = 0; t < cosines.size(); ++t) {
                             const double c = cosines[t];
                             // d/dc softplus(-c) = -sigmoid(-c)
                             const double dc = -(c >= 0 ? std::exp(-c) / (1.0 + std::exp(-c)) : 1.0 / (1.0 + std::exp(c)));
                             const bool clamped = s_norm[t] <= eps;
                             for (std::size_t d = 0; d < dim; ++d) {
                               const double sv = p.value(t, d);
                               const double hv_d = hv(t, d);
                               const double diff = sv - hv_d;
                               const double l1 = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) / static_cast<double>(dim);
                               double dcos = hv_d / (s_norm[t] * h_norm[t]);
                               if (!clamped) dcos -= c * sv / (s_norm[t] * s_norm[t]);
                               g(t, d) += upstream * (l1 + dc * dcos);
                             }
                           }
                         });
}

inline DistillLossValue evaluate_distill_loss(const Tensor& student, const Tensor& teacher, double eps = 1e-8) {
  ag::NoGradGuard guard;
  const double sum = distill_loss(ag::Var(student), ag::Var(teacher), eps).item();
  return {sum, sum / static_cast<double>(student.rows())};
}

}  // namespace auv::distill
