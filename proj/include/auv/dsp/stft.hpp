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
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "auv/core/audio.hpp"
#include "auv/core/autograd.hpp"
#include "auv/core/error.hpp"
#include "auv/dsp/fft.hpp"

namespace auv::dsp {

enum class WindowType { hann, rectangular };

/// Framing parameters shared by the codec's analysis and synthesis heads.
/// Signals are right-padded with zeros to frames * hop samples; with `center`
/// set, frame t is centred on sample t * hop.
struct StftConfig {
  std::size_t n_fft = 1024;
  std::size_t win_length = 1024;
  std::size_t hop_length = 320;
  WindowType window = WindowType::hann;
  bool center = true;

  std::size_t bins() const noexcept { return n_fft / 2 + 1; }

  std::size_t frame_count(std::size_t length) const { return (length + hop_length - 1) / hop_length; }
  std::size_t padded_length(std::size_t length) const { return frame_count(length) * hop_length; }

  void validate() const {
    if (hop_length == 0) throw ConfigError("stft: hop_length must be positive");
    if (win_length == 0) throw ConfigError("stft: win_length must be positive");
    if (n_fft < win_length) {
      throw ConfigError("stft: n_fft (" + std::to_string(n_fft) + ") < win_length (" + std::to_string(win_length) + ")");
    }
    if (hop_length > win_length) {
      throw ConfigError("stft: hop_length (" + std::to_string(hop_length) + ") > win_length (" +
                        std::to_string(win_length) + ") leaves samples uncovered");
    }
  }

  bool operator==(const StftConfig&) const = default;
};

/// Analysis window of length n_fft; a shorter window is zero-padded symmetrically.
inline std::vector<double> make_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.n_fft, 0.0);
  const std::size_t offset = (cfg.n_fft - cfg.win_length) / 2;
  for (std::size_t n = 0; n < cfg.win_length; ++n) {
    // Periodic Hann.
    w[offset + n] = cfg.window == WindowType::hann
                        ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                               static_cast<double>(cfg.win_length))
                        : 1.0;
  }
  return w;
}

struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;  // frames x bins, row-major
  StftConfig config;
  std::size_t original_length = 0;
  int sample_rate = 16000;

  std::complex<double>& at(std::size_t t, std::size_t k) { return values[t * bins + k]; }
  std::complex<double> at(std::size_t t, std::size_t k) const { return values[t * bins + k]; }
};

namespace detail {

inline std::ptrdiff_t frame_origin(const StftConfig& cfg, std::size_t t) {
  return static_cast<std::ptrdiff_t>(t * cfg.hop_length) -
         (cfg.center ? static_cast<std::ptrdiff_t>(cfg.n_fft / 2) : 0);
}

inline bool is_edge_bin(std::size_t k, std::size_t n_fft) { return k == 0 || (n_fft % 2 == 0 && k == n_fft / 2); }

/// Sum of squared window over frames, per output sample in [0, frames * hop).
inline std::vector<double> window_envelope(const StftConfig& cfg, const std::vector<double>& w, std::size_t frames) {
  const std::size_t out_len = frames * cfg.hop_length;
  std::vector<double> env(out_len, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t base = frame_origin(cfg, t);
    for (std::size_t n = 0; n < cfg.n_fft; ++n) {
      const std::ptrdiff_t i = base + static_cast<std::ptrdiff_t>(n);
      if (i >= 0 && i < static_cast<std::ptrdiff_t>(out_len)) env[static_cast<std::size_t>(i)] += w[n] * w[n];
    }
  }
  return env;
}

}  // namespace detail

/// Real-valued STFT: returns [frames, 2 * bins] with real parts in the first
/// `bins` columns and imaginary parts in the rest.
inline Tensor stft_forward(std::span<const double> x, const StftConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw ConfigError("stft: empty input");
  const std::size_t frames = cfg.frame_count(x.size());
  const std::size_t bins = cfg.bins();
  const auto window = make_window(cfg);
  RealFft& fft = RealFft::get(cfg.n_fft);
  std::vector<double> frame(cfg.n_fft);
  std::vector<std::complex<double>> spec(bins);
  Tensor out = Tensor::matrix(frames, 2 * bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t base = detail::frame_origin(cfg, t);
    for (std::size_t n = 0; n < cfg.n_fft; ++n) {
      const std::ptrdiff_t i = base + static_cast<std::ptrdiff_t>(n);
      frame[n] = (i >= 0 && i < static_cast<std::ptrdiff_t>(x.size())) ? window[n] * x[static_cast<std::size_t>(i)] : 0.0;
    }
    fft.forward(frame.data(), spec.data());
    for (std::size_t k = 0; k < bins; ++k) {
      out(t, k) = spec[k].real();
      out(t, bins + k) = spec[k].imag();
    }
  }
  return out;
}

/// Adjoint of stft_forward with respect to the first `length` input samples.
inline std::vector<double> stft_adjoint(const Tensor& grad, std::size_t length, const StftConfig& cfg) {
  const std::size_t frames = grad.rows();
  const std::size_t bins = cfg.bins();
  const auto window = make_window(cfg);
  RealFft& fft = RealFft::get(cfg.n_fft);
  std::vector<std::complex<double>> spec(bins);
  std::vector<double> frame(cfg.n_fft);
  std::vector<double> gx(length, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = grad(t, k);
      const double im = grad(t, bins + k);
      spec[k] = detail::is_edge_bin(k, cfg.n_fft) ? std::complex<double>(re, 0.0) : std::complex<double>(0.5 * re, 0.5 * im);
    }
    fft.inverse(spec.data(), frame.data());
    const std::ptrdiff_t base = detail::frame_origin(cfg, t);
    for (std::size_t n = 0; n < cfg.n_fft; ++n) {
      const std::ptrdiff_t i = base + static_cast<std::ptrdiff_t>(n);
      if (i >= 0 && i < static_cast<std::ptrdiff_t>(length)) gx[static_cast<std::size_t>(i)] += window[n] * frame[n];
    }
  }
  return gx;
}

/// Least-squares overlap-add inverse of stft_forward, trimmed to `length` samples.
inline std::vector<double> istft_forward(const Tensor& spec, std::size_t length, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t frames = spec.rows();
  const std::size_t bins = cfg.bins();
  if (spec.cols() != 2 * bins) {
    throw ConfigError("istft: spectrum has " + std::to_string(spec.cols() / 2) + " bins, config expects " +
                      std::to_string(bins));
  }
  if (length > frames * cfg.hop_length) throw ConfigError("istft: requested length exceeds frames * hop");
  const auto window = make_window(cfg);
  const auto env = detail::window_envelope(cfg, window, frames);
  RealFft& fft = RealFft::get(cfg.n_fft);
  std::vector<std::complex<double>> buf(bins);
  std::vector<double> frame(cfg.n_fft);
  std::vector<double> y(frames * cfg.hop_length, 0.0);
  const double inv_n = 1.0 / static_cast<double>(cfg.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) buf[k] = {spec(t, k), spec(t, bins + k)};
    fft.inverse(buf.data(), frame.data());
    const std::ptrdiff_t base = detail::frame_origin(cfg, t);
    for (std::size_t n = 0; n < cfg.n_fft; ++n) {
      const std::ptrdiff_t i = base + static_cast<std::ptrdiff_t>(n);
      if (i >= 0 && i < static_cast<std::ptrdiff_t>(y.size())) y[static_cast<std::size_t>(i)] += window[n] * frame[n] * inv_n;
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = env[i] > 1e-11 ? y[i] / env[i] : 0.0;
  y.resize(length);
  return y;
}

/// Adjoint of istft_forward with respect to the spectrum.
inline Tensor istft_adjoint(std::span<const double> grad, std::size_t frames, const StftConfig& cfg) {
  const std::size_t bins = cfg.bins();
  const auto window = make_window(cfg);
  const auto env = detail::window_envelope(cfg, window, frames);
  RealFft& fft = RealFft::get(cfg.n_fft);
  std::vector<double> frame(cfg.n_fft);
  std::vector<std::complex<double>> g(bins);
  Tensor out = Tensor::matrix(frames, 2 * bins);
  const double inv_n = 1.0 / static_cast<double>(cfg.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t base = detail::frame_origin(cfg, t);
    for (std::size_t n = 0; n < cfg.n_fft; ++n) {
      const std::ptrdiff_t i = base + static_cast<std::ptrdiff_t>(n);
      const bool inside = i >= 0 && i < static_cast<std::ptrdiff_t>(grad.size()) && env[static_cast<std::size_t>(i)] > 1e-11;
      frame[n] = inside ? window[n] * grad[static_cast<std::size_t>(i)] / env[static_cast<std::size_t>(i)] : 0.0;
    }
    fft.forward(frame.data(), g.data());
    for (std::size_t k = 0; k < bins; ++k) {
      const bool edge = detail::is_edge_bin(k, cfg.n_fft);
      const double c = (edge ? 1.0 : 2.0) * inv_n;
      out(t, k) = c * g[k].real();
      out(t, bins + k) = edge ? 0.0 : c * g[k].imag();
    }
  }
  return out;
}

// ---- segment-level API -----------------------------------------------------

inline ComplexSpectrogram stft(const AudioSegment& segment, const StftConfig& cfg) {
  if (segment.empty()) throw ConfigError("stft: empty audio segment");
  Tensor packed = stft_forward(segment.samples, cfg);
  ComplexSpectrogram spec;
  spec.frames = packed.rows();
  spec.bins = cfg.bins();
  spec.config = cfg;
  spec.original_length = segment.size();
  spec.sample_rate = segment.sample_rate;
  spec.values.resize(spec.frames * spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t k = 0; k < spec.bins; ++k) spec.at(t, k) = {packed(t, k), packed(t, spec.bins + k)};
  return spec;
}

inline AudioSegment istft(const ComplexSpectrogram& spec, const StftConfig& cfg) {
  if (!(spec.config == cfg)) throw ConfigError("istft: spectrogram was produced with a different StftConfig");
  Tensor packed = Tensor::matrix(spec.frames, 2 * spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t k = 0; k < spec.bins; ++k) {
      packed(t, k) = spec.at(t, k).real();
      packed(t, spec.bins + k) = spec.at(t, k).imag();
    }
  AudioSegment out;
  out.sample_rate = spec.sample_rate;
  out.samples = istft_forward(packed, spec.original_length, cfg);
  return out;
}

// ---- differentiable ops ----------------------------------------------------

/// wave[L] -> [frames, 2 * bins].
inline ag::Var stft(const ag::Var& wave, const StftConfig& cfg) {
  const std::size_t length = wave.size();
  Tensor out = stft_forward(wave.value().values(), cfg);
  return ag::make_result(std::move(out), {wave}, [cfg, length](ag::Node& self) {
    ag::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const auto gx = stft_adjoint(self.grad, length, cfg);
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < length; ++i) g[i] += gx[i];
  });
}

/// [frames, 2 * bins] -> wave[length].
inline ag::Var istft(const ag::Var& spec, std::size_t length, const StftConfig& cfg) {
  std::vector<double> y = istft_forward(spec.value(), length, cfg);
  Tensor out({length}, std::move(y));
  return ag::make_result(std::move(out), {spec}, [cfg](ag::Node& self) {
    ag::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.grad_buffer() += istft_adjoint(self.grad.values(), p.value.rows(), cfg);
  });
}

/// |X| per bin from the packed [frames, 2 * bins] layout; zero-magnitude bins get zero gradient.
inline ag::Var magnitude(const ag::Var& spec) {
  const std::size_t frames = spec.value().rows();
  const std::size_t bins = spec.value().cols() / 2;
  Tensor out = Tensor::matrix(frames, bins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = std::hypot(spec.value()(t, k), spec.value()(t, bins + k));
  return ag::make_result(std::move(out), {spec}, [bins](ag::Node& self) {
    ag::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t t = 0; t < self.value.rows(); ++t)
      for (std::size_t k = 0; k < bins; ++k) {
        const double m = self.value(t, k);
        if (m <= 1e-12) continue;
        const double gm = self.grad(t, k) / m;
        g(t, k) += gm * p.value(t, k);
        g(t, bins + k) += gm * p.value(t, bins + k);
      }
  });
}

}  // namespace auv::dsp
