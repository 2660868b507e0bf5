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
#include <string>
#include <vector>

#include "auv/core/autograd.hpp"

namespace auv::ag {

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  a.value().check_same_shape(b.value(), op);
}

inline void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(x.shape()));
  }
}

/// Elementwise map; `deriv(x, y)` returns dy/dx.
template <class F, class D>
Var elementwise(const Var& x, F f, D deriv) {
  Tensor out = Tensor::zeros_like(x.value());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

inline double sigmoid_scalar(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace detail

// ---- elementwise arithmetic ------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad_buffer() += self.grad;
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

inline Var scale(const Var& x, double c) {
  return detail::elementwise(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Var add_scalar(const Var& x, double c) {
  return detail::elementwise(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& x) { return scale(x, c); }

// ---- elementwise nonlinearities --------------------------------------------

inline Var sigmoid(const Var& x) {
  return detail::elementwise(x, detail::sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var silu(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return v * detail::sigmoid_scalar(v); },
      [](double v, double) {
        const double s = detail::sigmoid_scalar(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

inline Var exp(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var log(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Var cos(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

inline Var sin(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

/// |x| with subgradient 0 at the origin.
inline Var abs(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

inline Var square(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Var relu(const Var& x) {
  return detail::elementwise(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(const Var& x, double slope) {
  return detail::elementwise(
      x, [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

/// min(x, hi); gradient passes only where x < hi.
inline Var clamp_max(const Var& x, double hi) {
  return detail::elementwise(
      x, [hi](double v) { return v < hi ? v : hi; }, [hi](double v, double) { return v < hi ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    const double gs = self.grad[0];
    for (double& v : g.values()) v += gs;
  });
}

inline Var mean(const Var& x) {
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

/// Mean absolute difference, the L1 distance used throughout the losses.
inline Var mean_abs_diff(const Var& a, const Var& b) { return mean(abs(sub(a, b))); }

/// Weighted sum of scalars.
inline Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size() || terms.empty()) throw ShapeError("weighted_sum: bad arity");
  Var total = scale(terms[0], weights[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, scale(terms[i], weights[i]));
  return total;
}

// ---- shape manipulation ----------------------------------------------------

inline Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

inline Var transpose(const Var& x) {
  detail::require_rank(x, 2, "transpose");
  Tensor out = Tensor::matrix(x.value().cols(), x.value().rows());
  as_matrix(out) = as_matrix(x.value()).transpose();
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (p.requires_grad) as_matrix(p.grad_buffer()) += as_matrix(self.grad).transpose();
  });
}

inline Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
  detail::require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.value().rows();
  const std::size_t cols = x.value().cols();
  if (start + count > cols) throw ShapeError("slice_cols: range exceeds columns");
  Tensor out = Tensor::matrix(rows, count);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x.value()(r, start + c);
  return make_result(std::move(out), {x}, [start, count](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) g(r, start + c) += self.grad(r, c);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank(p, 2, "concat_cols");
    if (p.value().rows() != rows) throw ShapeError("concat_cols: row mismatch");
    total += p.value().cols();
  }
  Tensor out = Tensor::matrix(rows, total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    as_matrix(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.value().cols())) =
        as_matrix(p.value());
    offset += p.value().cols();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const auto c = static_cast<Eigen::Index>(p->value.cols());
      if (p->requires_grad)
        as_matrix(p->grad_buffer()) += as_matrix(self.grad).middleCols(static_cast<Eigen::Index>(off), c);
      off += static_cast<std::size_t>(c);
    }
  });
}

// ---- linear algebra --------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  if (a.value().cols() != b.value().rows()) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(a.value().rows(), b.value().cols());
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) as_matrix(pa.grad_buffer()).noalias() += as_matrix(self.grad) * as_matrix(pb.value).transpose();
    if (pb.requires_grad) as_matrix(pb.grad_buffer()).noalias() += as_matrix(pa.value).transpose() * as_matrix(self.grad);
  });
}

/// x[T,n] + b[n] broadcast over rows.
inline Var add_row(const Var& x, const Var& b) {
  detail::require_rank(x, 2, "add_row");
  if (b.size() != x.value().cols()) throw ShapeError("add_row: bias length mismatch");
  Tensor out = x.value();
  auto m = as_matrix(out);
  m.rowwise() += as_matrix(b.value()).row(0);
  return make_result(std::move(out), {x, b}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) px.grad_buffer() += self.grad;
    if (pb.requires_grad) as_matrix(pb.grad_buffer()).row(0) += as_matrix(self.grad).colwise().sum();
  });
}

/// x[T,in] W[in,out] + b[out].
inline Var linear(const Var& x, const Var& w, const Var& b) {
  detail::require_rank(x, 2, "linear");
  if (x.value().cols() != w.value().rows() || w.value().cols() != b.size()) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " weight " + shape_string(w.shape()) +
                     " bias " + shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(x.value().rows(), w.value().cols());
  auto m = as_matrix(out);
  m.noalias() = as_matrix(x.value()) * as_matrix(w.value());
  m.rowwise() += as_matrix(b.value()).row(0);
  return make_result(std::move(out), {x, w, b}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const auto g = as_matrix(self.grad);
    if (px.requires_grad) as_matrix(px.grad_buffer()).noalias() += g * as_matrix(pw.value).transpose();
    if (pw.requires_grad) as_matrix(pw.grad_buffer()).noalias() += as_matrix(px.value).transpose() * g;
    if (pb.requires_grad) as_matrix(pb.grad_buffer()).row(0) += g.colwise().sum();
  });
}

/// Row-wise layer normalisation with affine gain and bias.
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5) {
  detail::require_rank(x, 2, "layer_norm");
  const std::size_t rows = x.value().rows();
  const std::size_t n = x.value().cols();
  if (gamma.size() != n || beta.size() != n) throw ShapeError("layer_norm: affine size mismatch");
  Tensor out = Tensor::matrix(rows, n);
  Tensor xhat = Tensor::matrix(rows, n);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.value().row(r);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (in[c] - mu) * inv_std[r];
      out(r, c) = gamma.value()[c] * xhat(r, c) + beta.value()[c];
    }
  }
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pg = *self.parents[1];
                       Node& pb = *self.parents[2];
                       const std::size_t rows = xhat.rows();
                       const std::size_t n = xhat.cols();
                       if (pg.requires_grad || pb.requires_grad) {
                         Tensor& gg = pg.grad_buffer();
                         Tensor& gb = pb.grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < n; ++c) {
                             gg[c] += self.grad(r, c) * xhat(r, c);
                             gb[c] += self.grad(r, c);
                           }
                       }
                       if (!px.requires_grad) return;
                       Tensor& gx = px.grad_buffer();
                       std::vector<double> dxhat(n);
                       for (std::size_t r = 0; r < rows; ++r) {
                         double mean_d = 0.0;
                         double mean_dx = 0.0;
                         for (std::size_t c = 0; c < n; ++c) {
                           dxhat[c] = self.grad(r, c) * pg.value[c];
                           mean_d += dxhat[c];
                           mean_dx += dxhat[c] * xhat(r, c);
                         }
                         mean_d /= static_cast<double>(n);
                         mean_dx /= static_cast<double>(n);
                         for (std::size_t c = 0; c < n; ++c)
                           gx(r, c) += inv_std[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
                       }
                     });
}

inline Var softmax_rows(const Var& x) {
  detail::require_rank(x, 2, "softmax_rows");
  Tensor out = x.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < self.value.cols(); ++c) dot += self.grad(r, c) * self.value(r, c);
      for (std::size_t c = 0; c < self.value.cols(); ++c) g(r, c) += self.value(r, c) * (self.grad(r, c) - dot);
    }
  });
}

/// Gated linear unit over columns: first half * sigmoid(second half).
inline Var glu_cols(const Var& x) {
  detail::require_rank(x, 2, "glu_cols");
  if (x.value().cols() % 2 != 0) throw ShapeError("glu_cols: odd column count");
  const std::size_t half = x.value().cols() / 2;
  return mul(slice_cols(x, 0, half), sigmoid(slice_cols(x, half, half)));
}

/// Per-channel convolution along time: x[T,C], kernel[K,C] (K odd), same padding.
inline Var depthwise_conv_time(const Var& x, const Var& kernel, const Var& bias) {
  detail::require_rank(x, 2, "depthwise_conv_time");
  const std::size_t steps = x.value().rows();
  const std::size_t channels = x.value().cols();
  const std::size_t taps = kernel.value().rows();
  if (kernel.value().cols() != channels || bias.size() != channels || taps % 2 == 0) {
    throw ShapeError("depthwise_conv_time: kernel " + shape_string(kernel.shape()) + " for input " +
                     shape_string(x.shape()));
  }
  const auto half = static_cast<std::ptrdiff_t>(taps / 2);
  Tensor out = Tensor::matrix(steps, channels);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t c = 0; c < channels; ++c) out(t, c) = bias.value()[c];
    for (std::size_t k = 0; k < taps; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
      const auto s = static_cast<std::size_t>(src);
      for (std::size_t c = 0; c < channels; ++c) out(t, c) += kernel.value()(k, c) * x.value()(s, c);
    }
  }
  return make_result(std::move(out), {x, kernel, bias}, [half, taps](Node& self) {
    Node& px = *self.parents[0];
    Node& pk = *self.parents[1];
    Node& pb = *self.parents[2];
    const std::size_t steps = self.value.rows();
    const std::size_t channels = self.value.cols();
    if (pb.requires_grad) {
      Tensor& gb = pb.grad_buffer();
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t c = 0; c < channels; ++c) gb[c] += self.grad(t, c);
    }
    Tensor* gx = px.requires_grad ? &px.grad_buffer() : nullptr;
    Tensor* gk = pk.requires_grad ? &pk.grad_buffer() : nullptr;
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t k = 0; k < taps; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
        const auto s = static_cast<std::size_t>(src);
        for (std::size_t c = 0; c < channels; ++c) {
          const double g = self.grad(t, c);
          if (gx) (*gx)(s, c) += g * pk.value(k, c);
          if (gk) (*gk)(k, c) += g * px.value(s, c);
        }
      }
    }
  });
}

namespace detail {
/// Output columns j in [first, last) whose input column j * stride + offset - pad lies in [0, width).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t out_width, std::size_t stride, std::size_t offset, std::size_t pad,
                                                       std::size_t width) {
  const std::size_t first = offset >= pad ? 0 : (pad - offset + stride - 1) / stride;
  const std::size_t last = width + pad <= offset ? 0 : (width + pad - offset + stride - 1) / stride;
  return {std::min(first, out_width), std::min(std::max(first, last), out_width)};
}
}  // namespace detail

struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

namespace detail {
/// y[n * sy] += a * x[n * sx] for n < len.
inline void strided_axpy(std::size_t len, double a, const double* __restrict x, std::size_t sx, double* __restrict y, std::size_t sy) {
  if (sx == 1 && sy == 1) {
    for (std::size_t n = 0; n < len; ++n) y[n] += a * x[n];
  } else {
    for (std::size_t n = 0; n < len; ++n) y[n * sy] += a * x[n * sx];
  }
}

/// Sum of x[n] * y[n * sy] for n < len.
inline double strided_dot(std::size_t len, const double* __restrict x, const double* __restrict y, std::size_t sy) {
  double acc = 0.0;
  if (sy == 1) {
    for (std::size_t n = 0; n < len; ++n) acc += x[n] * y[n];
  } else {
    for (std::size_t n = 0; n < len; ++n) acc += x[n] * y[n * sy];
  }
  return acc;
}

/// Visits every (output row, kernel tap) pair of a zero-padded 2-D convolution.
/// `f(co, ci, a, b, i, x_off, j0, j1)`: output column j0 + n of row i reads
/// input element x_off + n * stride_w for n < j1 - j0.
template <typename F>
void conv2d_taps(const Conv2dGeometry& geo, std::size_t cin, std::size_t h, std::size_t w, std::size_t cout, std::size_t kh, std::size_t kw,
                 std::size_t ho, std::size_t wo, F&& f) {
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
          const auto [j0, j1] = valid_range(wo, geo.stride_w, b, geo.pad_w, w);
          if (j0 == j1) continue;
          for (std::size_t i = 0; i < ho; ++i) {
            const auto hh = static_cast<std::ptrdiff_t>(i * geo.stride_h + a) - static_cast<std::ptrdiff_t>(geo.pad_h);
            if (hh < 0 || hh >= static_cast<std::ptrdiff_t>(h)) continue;
            const std::size_t x_off = (ci * h + static_cast<std::size_t>(hh)) * w + j0 * geo.stride_w + b - geo.pad_w;
            f(co, ci, a, b, i, x_off, j0, j1);
          }
        }
}
}  // namespace detail

namespace detail {
/// Direct-loop convolution without an im2col buffer; suited to wide output rows.
inline Var conv2d_direct(const Var& x, const Var& weight, const Var& bias, Conv2dGeometry geo, std::size_t cin, std::size_t h, std::size_t w,
                         std::size_t cout, std::size_t kh, std::size_t kw, std::size_t ho, std::size_t wo) {
  Tensor out({cout, ho, wo});
  detail::conv2d_taps(geo, cin, h, w, cout, kh, kw, ho, wo, [&](std::size_t co, std::size_t ci, std::size_t a, std::size_t b, std::size_t i,
                                                               std::size_t x_off, std::size_t j0, std::size_t j1) {
    const double wv = weight.value()[((co * cin + ci) * kh + a) * kw + b];
    const double* xs = x.value().data() + x_off;
    double* o = out.data() + (co * ho + i) * wo + j0;
    strided_axpy(j1 - j0, wv, xs, geo.stride_w, o, 1);
  });
  for (std::size_t co = 0; co < cout; ++co) {
    double* o = out.data() + co * ho * wo;
    const double bv = bias.value()[co];
    for (std::size_t n = 0; n < ho * wo; ++n) o[n] += bv;
  }

  return make_result(std::move(out), {x, weight, bias}, [geo, cin, h, w, kh, kw, ho, wo, cout](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const double* g = self.grad.data();
    if (pb.requires_grad) {
      Tensor& gb = pb.grad_buffer();
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t n = 0; n < ho * wo; ++n) gb[co] += g[co * ho * wo + n];
    }
    double* gw = pw.requires_grad ? pw.grad_buffer().data() : nullptr;
    double* gx = px.requires_grad ? px.grad_buffer().data() : nullptr;
    if (!gw && !gx) return;
    detail::conv2d_taps(geo, cin, h, w, cout, kh, kw, ho, wo, [&](std::size_t co, std::size_t ci, std::size_t a, std::size_t b, std::size_t i,
                                                                 std::size_t x_off, std::size_t j0, std::size_t j1) {
      const std::size_t widx = ((co * cin + ci) * kh + a) * kw + b;
      const double* gr = g + (co * ho + i) * wo + j0;
      if (gw) {
        const double* xs = px.value.data() + x_off;
        gw[widx] += strided_dot(j1 - j0, gr, xs, geo.stride_w);
      }
      if (gx) {
        const double wv = pw.value[widx];
        double* xs = gx + x_off;
        strided_axpy(j1 - j0, wv, gr, 1, xs, geo.stride_w);
      }
    });
  });
}
}  // namespace detail

/// Output width from which conv2d skips im2col and loops directly.
inline constexpr std::size_t kDirectConvMinWidth = 32;

/// 2-D convolution: x[Cin,H,W], weight[Cout,Cin,kh,kw], bias[Cout] -> [Cout,Ho,Wo], zero padding.
inline Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dGeometry geo) {
  detail::require_rank(x, 3, "conv2d");
  detail::require_rank(weight, 4, "conv2d weight");
  const std::size_t cin = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2);
  const std::size_t cout = weight.value().dim(0), kh = weight.value().dim(2), kw = weight.value().dim(3);
  if (weight.value().dim(1) != cin || bias.size() != cout) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) + " for input " + shape_string(x.shape()));
  }
  if (h + 2 * geo.pad_h < kh || w + 2 * geo.pad_w < kw) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " smaller than kernel");
  }
  const std::size_t ho = (h + 2 * geo.pad_h - kh) / geo.stride_h + 1;
  const std::size_t wo = (w + 2 * geo.pad_w - kw) / geo.stride_w + 1;
  if (wo >= kDirectConvMinWidth) return detail::conv2d_direct(x, weight, bias, geo, cin, h, w, cout, kh, kw, ho, wo);
  const std::size_t patch = cin * kh * kw;
  // im2col: [patch, ho*wo]
  auto cols = std::make_shared<Tensor>(Shape{patch, ho * wo});
  const double* xv = x.value().data();
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t a = 0; a < kh; ++a)
      for (std::size_t b = 0; b < kw; ++b) {
        double* dst = cols->data() + ((ci * kh + a) * kw + b) * ho * wo;
        const auto [j0, j1] = detail::valid_range(wo, geo.stride_w, b, geo.pad_w, w);
        for (std::size_t i = 0; i < ho; ++i) {
          double* row = dst + i * wo;
          const auto src_h = static_cast<std::ptrdiff_t>(i * geo.stride_h + a) - static_cast<std::ptrdiff_t>(geo.pad_h);
          if (src_h < 0 || src_h >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(row, row + wo, 0.0);
            continue;
          }
          const auto base = static_cast<std::ptrdiff_t>((ci * h + static_cast<std::size_t>(src_h)) * w + b) -
                            static_cast<std::ptrdiff_t>(geo.pad_w);
          std::fill(row, row + j0, 0.0);
          for (std::size_t j = j0; j < j1; ++j) row[j] = xv[base + static_cast<std::ptrdiff_t>(j * geo.stride_w)];
          std::fill(row + j1, row + wo, 0.0);
        }
      }
  Tensor out({cout, ho, wo});
  ConstMatrixMap wmat(weight.value().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  MatrixMap omat(out.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(ho * wo));
  omat.noalias() = wmat * as_matrix(*cols);
  for (std::size_t co = 0; co < cout; ++co) omat.row(static_cast<Eigen::Index>(co)).array() += bias.value()[co];

  return make_result(std::move(out), {x, weight, bias}, [cols, geo, cin, h, w, kh, kw, ho, wo, cout, patch](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    ConstMatrixMap gmat(self.grad.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(ho * wo));
    if (pb.requires_grad) {
      Tensor& gb = pb.grad_buffer();
      for (std::size_t co = 0; co < cout; ++co) gb[co] += gmat.row(static_cast<Eigen::Index>(co)).sum();
    }
    if (pw.requires_grad) {
      MatrixMap gw(pw.grad_buffer().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
      gw.noalias() += gmat * as_matrix(*cols).transpose();
    }
    if (!px.requires_grad) return;
    ConstMatrixMap wmat(pw.value.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
    RowMatrix gcols = wmat.transpose() * gmat;
    Tensor& gx = px.grad_buffer();
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
          const double* src = gcols.data() + ((ci * kh + a) * kw + b) * ho * wo;
          const auto [j0, j1] = detail::valid_range(wo, geo.stride_w, b, geo.pad_w, w);
          for (std::size_t i = 0; i < ho; ++i) {
            const auto hh = static_cast<std::ptrdiff_t>(i * geo.stride_h + a) - static_cast<std::ptrdiff_t>(geo.pad_h);
            if (hh < 0 || hh >= static_cast<std::ptrdiff_t>(h)) continue;
            const auto base = static_cast<std::ptrdiff_t>((ci * h + static_cast<std::size_t>(hh)) * w + b) -
                              static_cast<std::ptrdiff_t>(geo.pad_w);
            const double* row = src + i * wo;
            for (std::size_t j = j0; j < j1; ++j) gx.data()[base + static_cast<std::ptrdiff_t>(j * geo.stride_w)] += row[j];
          }
        }
  });
}

// ---- quantisation helpers --------------------------------------------------

/// Forward value of `quantized`, gradient routed unchanged to `latents`.
inline Var straight_through(const Var& latents, const Var& quantized) {
  detail::require_same_shape(latents, quantized, "straight_through");
  return make_result(quantized.value(), {latents}, [](Node& self) {
    Node& p = *self.parents[0];
    if (p.requires_grad) p.grad_buffer() += self.grad;
  });
}

/// Selects rows of table[K,d]; gradients scatter-add back into the table.
inline Var gather_rows(const Var& table, const std::vector<std::uint32_t>& indices) {
  detail::require_rank(table, 2, "gather_rows");
  const std::size_t d = table.value().cols();
  Tensor out = Tensor::matrix(indices.size(), d);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (indices[t] >= table.value().rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(table.value().row(indices[t]).begin(), d, out.row(t).begin());
  }
  return make_result(std::move(out), {table}, [indices](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    const std::size_t d = g.cols();
    for (std::size_t t = 0; t < indices.size(); ++t)
      for (std::size_t c = 0; c < d; ++c) g(indices[t], c) += self.grad(t, c);
  });
}

/// Row-wise x / max(|x|, eps).
inline Var l2_normalize_rows(const Var& x, double eps = 1e-12) {
  detail::require_rank(x, 2, "l2_normalize_rows");
  Tensor out = x.value();
  std::vector<double> norms(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double s = 0.0;
    for (double v : out.row(r)) s += v * v;
    norms[r] = std::max(std::sqrt(s), eps);
    for (double& v : out.row(r)) v /= norms[r];
  }
  return make_result(std::move(out), {x}, [norms = std::move(norms), eps](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      const bool clamped = norms[r] <= eps;
      double dot = 0.0;
      if (!clamped)
        for (std::size_t c = 0; c < self.value.cols(); ++c) dot += self.grad(r, c) * self.value(r, c);
      for (std::size_t c = 0; c < self.value.cols(); ++c)
        g(r, c) += (self.grad(r, c) - dot * self.value(r, c)) / norms[r];
    }
  });
}

}  // namespace auv::ag
