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

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

namespace auv::dsp {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real-input FFT of a fixed size backed by FFTW. Not shareable across threads;
/// use RealFft::get() for a thread-local cached instance.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    time_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    freq_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins()));
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), time_, freq_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq_, time_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(time_);
    fftw_free(freq_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// X[k] = sum_n x[n] e^{-2 pi i k n / N}, k = 0..N/2.
  void forward(const double* in, std::complex<double>* out) {
    std::memcpy(time_, in, sizeof(double) * n_);
    fftw_execute(forward_);
    std::memcpy(static_cast<void*>(out), freq_, sizeof(fftw_complex) * bins());
  }

  /// Unnormalised inverse: x[n] = sum over the Hermitian-extended spectrum, no 1/N.
  /// Imaginary parts of the DC (and Nyquist, for even N) bins are ignored.
  void inverse(const std::complex<double>* in, double* out) {
    std::memcpy(static_cast<void*>(freq_), in, sizeof(fftw_complex) * bins());
    fftw_execute(inverse_);
    std::memcpy(out, time_, sizeof(double) * n_);
  }

  static RealFft& get(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
  }

 private:
  std::size_t n_;
  double* time_ = nullptr;
  fftw_complex* freq_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace auv::dsp
