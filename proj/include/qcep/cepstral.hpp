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

#ifndef QCEP_CEPSTRAL_HPP_
#define QCEP_CEPSTRAL_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "qcep/fft.hpp"

namespace qcep {

// Mel scale: m = 2595 * log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// A bank of triangular filters with Mel-spaced peaks. Row k rises linearly
// from anchor bin k-1 to exactly 1.0 at anchor bin k and falls to zero at
// anchor bin k+1.
struct FilterBank {
  std::vector<std::vector<double>> weights;  // n_fl rows x (n_fft/2 + 1) bins
  std::vector<double> mel_points;            // n_fl + 2 anchors, equally spaced in Mel
  std::vector<std::size_t> bin_points;       // anchors snapped to FFT bins
  std::size_t n_fl = 0;
  std::size_t n_fft = 0;
  double sr = 0.0;

  std::size_t n_bins() const { return n_fft / 2 + 1; }
};

// Anchors: n_fl + 2 points equally spaced in Mel between 0 and mel(sr/2),
// converted to Hz and snapped to bin floor((n_fft + 1) * hz / sr). Rejects
// configurations where two adjacent anchors land on the same bin.
FilterBank build_filterbank(double sr, std::size_t n_fl, std::size_t n_fft);

enum class CepstralKind { kMfb, kMfcc };
enum class LogBase { kLog10, kNatural };

// Per-frame cepstral features: one row per frame, n_keep columns.
struct CepstralTensor {
  std::vector<double> values;  // row-major, n_w x n_keep
  CepstralKind kind = CepstralKind::kMfb;
  std::size_t n_w = 0;
  std::size_t n_keep = 0;

  double at(std::size_t frame, std::size_t coeff) const {
    return values[frame * n_keep + coeff];
  }
  void validate() const;  // finite values, consistent shape
};

// Log filter-bank energies: entry (t, k) = log10(max(eps, row_k . p_t)) with
// eps = 1e-12; the first n_keep of the bank's n_fl coefficients are retained.
CepstralTensor mfb(const std::vector<Periodogram>& frames, const FilterBank& fb,
                   std::size_t n_keep, LogBase base = LogBase::kLog10);

// Orthonormal DCT-II of each MFB row; the output keeps the input shape.
CepstralTensor dct_mfcc(const CepstralTensor& mfb_tensor);

// Dense CSV export, one row per frame.
void write_tensor_csv(const std::string& path, const CepstralTensor& t);

}  // namespace qcep

#endif  // QCEP_CEPSTRAL_HPP_
