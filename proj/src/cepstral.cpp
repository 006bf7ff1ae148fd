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

#include "qcep/cepstral.hpp"

#include <cmath>
#include <cstdio>

#include "qcep/error.hpp"

namespace qcep {

namespace {
constexpr double kEnergyFloor = 1e-12;
constexpr double kPi = 3.1415926535897932384626433832795;
}  // namespace

double hz_to_mel(double hz) {
  if (hz < 0.0) throw DataError("hz_to_mel: negative frequency");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
  if (mel < 0.0) throw DataError("mel_to_hz: negative Mel value");
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

FilterBank build_filterbank(double sr, std::size_t n_fl, std::size_t n_fft) {
  if (n_fl < 1) throw DataError("build_filterbank: need at least one filter");
  if (!(sr > 0.0)) throw DataError("build_filterbank: sr must be > 0");
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) {
    throw DataError("build_filterbank: n_fft must be a power of two");
  }

  FilterBank fb;
  fb.sr = sr;
  fb.n_fl = n_fl;
  fb.n_fft = n_fft;

  const double mel_max = hz_to_mel(sr / 2.0);
  fb.mel_points.resize(n_fl + 2);
  fb.bin_points.resize(n_fl + 2);
  for (std::size_t j = 0; j < n_fl + 2; ++j) {
    const double mel = static_cast<double>(j) * mel_max / static_cast<double>(n_fl + 1);
    fb.mel_points[j] = mel;
    const double hz = mel_to_hz(mel);
    fb.bin_points[j] = static_cast<std::size_t>(
        std::floor(static_cast<double>(n_fft + 1) * hz / sr));
  }

  for (std::size_t j = 0; j + 1 < fb.bin_points.size(); ++j) {
    if (fb.bin_points[j] == fb.bin_points[j + 1]) {
      throw DataError("build_filterbank: anchors " + std::to_string(j) + " and " +
                      std::to_string(j + 1) + " snap to the same FFT bin " +
                      std::to_string(fb.bin_points[j]) +
                      " (filters " + std::to_string(j) + "/" + std::to_string(j + 1) +
                      " collide; raise n_fft or lower n_fl)");
    }
  }

  const std::size_t n_bins = fb.n_bins();
  fb.weights.assign(n_fl, std::vector<double>(n_bins, 0.0));
  for (std::size_t k = 1; k <= n_fl; ++k) {
    auto& row = fb.weights[k - 1];
    const std::size_t lo = fb.bin_points[k - 1];
    const std::size_t mid = fb.bin_points[k];
    const std::size_t hi = fb.bin_points[k + 1];
    for (std::size_t b = lo; b <= mid && b < n_bins; ++b) {
      row[b] = static_cast<double>(b - lo) / static_cast<double>(mid - lo);
    }
    for (std::size_t b = mid; b <= hi && b < n_bins; ++b) {
      row[b] = static_cast<double>(hi - b) / static_cast<double>(hi - mid);
    }
    row[mid] = 1.0;
  }
  return fb;
}

void CepstralTensor::validate() const {
  if (values.size() != n_w * n_keep) {
    throw DataError("cepstral tensor: shape mismatch");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("cepstral tensor: non-finite value");
  }
}

CepstralTensor mfb(const std::vector<Periodogram>& frames, const FilterBank& fb,
                   std::size_t n_keep, LogBase base) {
  if (n_keep > fb.n_fl) {
    throw DataError("mfb: n_keep exceeds the filter count");
  }
  CepstralTensor out;
  out.kind = CepstralKind::kMfb;
  out.n_w = frames.size();
  out.n_keep = n_keep;
  out.values.resize(out.n_w * n_keep);

  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& bins = frames[t].bins;
    if (bins.size() != fb.n_bins()) {
      throw DataError("mfb: periodogram has " + std::to_string(bins.size()) +
                      " bins, filter bank expects " + std::to_string(fb.n_bins()));
    }
    for (std::size_t k = 0; k < n_keep; ++k) {
      const auto& row = fb.weights[k];
      double energy = 0.0;
      // only the triangle support contributes
      for (std::size_t b = fb.bin_points[k]; b <= fb.bin_points[k + 2]; ++b) {
        energy += row[b] * bins[b];
      }
      energy = std::max(energy, kEnergyFloor);
      out.values[t * n_keep + k] =
          base == LogBase::kLog10 ? std::log10(energy) : std::log(energy);
    }
  }
  return out;
}

CepstralTensor dct_mfcc(const CepstralTensor& mfb_tensor) {
  if (mfb_tensor.kind != CepstralKind::kMfb) {
    throw DataError("dct_mfcc: input must be MFB features");
  }
  mfb_tensor.validate();

  const std::size_t n = mfb_tensor.n_keep;
  CepstralTensor out = mfb_tensor;
  out.kind = CepstralKind::kMfcc;

  // Orthonormal DCT-II basis: row k, column m = s_k * cos(pi*k*(2m+1)/(2n)).
  std::vector<double> basis(n * n);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < n; ++m) {
      basis[k * n + m] = (k == 0 ? s0 : sk) *
          std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(m) + 1.0) /
                   (2.0 * static_cast<double>(n)));
    }
  }

  for (std::size_t t = 0; t < mfb_tensor.n_w; ++t) {
    const double* row = &mfb_tensor.values[t * n];
    double* dst = &out.values[t * n];
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n; ++m) acc += basis[k * n + m] * row[m];
      dst[k] = acc;
    }
  }
  return out;
}

void write_tensor_csv(const std::string& path, const CepstralTensor& t) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write '" + path + "'");
  for (std::size_t r = 0; r < t.n_w; ++r) {
    for (std::size_t c = 0; c < t.n_keep; ++c) {
      std::fprintf(f, c + 1 == t.n_keep ? "%.17g\n" : "%.17g,", t.at(r, c));
    }
  }
  std::fclose(f);
}

}  // namespace qcep
