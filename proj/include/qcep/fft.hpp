/* Copyright 2026 The qcep authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef QCEP_FFT_HPP_
#define QCEP_FFT_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qcep {

// Iterative radix-2 decimation-in-time FFT. Twiddle factors and the
// bit-reversal permutation are precomputed once, so a plan is immutable and
// can be shared across threads.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n_fft);  // n_fft must be a power of two >= 2

  std::size_t size() const { return n_; }

  // Transforms a real frame of length <= n_fft (zero-padded up). Longer
  // frames are rejected: the caller must pick a larger transform length.
  std::vector<std::complex<double>> transform(std::span<const double> frame) const;

 private:
  std::size_t n_;
  unsigned log2n_;
  std::vector<std::complex<double>> twiddle_;  // exp(-2*pi*i*k/n), k < n/2
  std::vector<std::uint32_t> bitrev_;
};

// One-shot convenience wrapper around FftPlan.
std::vector<std::complex<double>> fft(std::span<const double> frame,
                                      std::size_t n_fft);

// Single-sided power spectrum of one frame: n_fft/2 + 1 bins.
struct Periodogram {
  std::vector<double> bins;  // |X_k|^2 / n_fft for k = 0..n_fft/2
  std::size_t n_fft = 0;
  double bin_hz = 0.0;       // sr / n_fft
};

Periodogram periodogram(std::span<const double> frame, const FftPlan& plan,
                        double sr);
Periodogram periodogram(std::span<const double> frame, std::size_t n_fft,
                        double sr);

}  // namespace qcep

#endif  // QCEP_FFT_HPP_
