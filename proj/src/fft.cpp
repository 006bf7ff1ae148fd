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

#include "qcep/fft.hpp"

#include <cmath>

#include "qcep/error.hpp"

namespace qcep {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }
}  // namespace

FftPlan::FftPlan(std::size_t n_fft) : n_(n_fft) {
  if (!is_pow2(n_fft)) {
    throw DataError("fft: transform length must be a power of two >= 2, got " +
                    std::to_string(n_fft));
  }
  log2n_ = 0;
  while ((std::size_t{1} << log2n_) < n_) ++log2n_;

  twiddle_.resize(n_ / 2);
  for (std::size_t k = 0; k < n_ / 2; ++k) {
    const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(n_);
    twiddle_[k] = {std::cos(a), std::sin(a)};
  }

  bitrev_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::uint32_t r = 0;
    for (unsigned b = 0; b < log2n_; ++b) {
      r = (r << 1) | ((i >> b) & 1u);
    }
    bitrev_[i] = r;
  }
}

std::vector<std::complex<double>> FftPlan::transform(
    std::span<const double> frame) const {
  if (frame.size() > n_) {
    throw DataError("fft: frame length " + std::to_string(frame.size()) +
                    " exceeds transform length " + std::to_string(n_));
  }

  std::vector<std::complex<double>> x(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t src = bitrev_[i];
    x[i] = src < frame.size() ? std::complex<double>(frame[src], 0.0)
                              : std::complex<double>(0.0, 0.0);
  }

  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t step = n_ / len;  // twiddle stride for this stage
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> w = twiddle_[k * step];
        const std::complex<double> odd = w * x[start + k + half];
        const std::complex<double> even = x[start + k];
        x[start + k] = even + odd;
        x[start + k + half] = even - odd;
      }
    }
  }
  return x;
}

std::vector<std::complex<double>> fft(std::span<const double> frame,
                                      std::size_t n_fft) {
  return FftPlan(n_fft).transform(frame);
}

Periodogram periodogram(std::span<const double> frame, const FftPlan& plan,
                        double sr) {
  const auto coeffs = plan.transform(frame);
  Periodogram p;
  p.n_fft = plan.size();
  p.bin_hz = sr / static_cast<double>(plan.size());
  p.bins.resize(plan.size() / 2 + 1);
  const double scale = 1.0 / static_cast<double>(plan.size());
  for (std::size_t k = 0; k < p.bins.size(); ++k) {
    p.bins[k] = std::norm(coeffs[k]) * scale;
  }
  return p;
}

Periodogram periodogram(std::span<const double> frame, std::size_t n_fft,
                        double sr) {
  return periodogram(frame, FftPlan(n_fft), sr);
}

}  // namespace qcep
