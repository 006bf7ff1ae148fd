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

#ifndef QCEP_FEATURES_HPP_
#define QCEP_FEATURES_HPP_

#include <cstddef>
#include <vector>

#include "qcep/cepstral.hpp"
#include "qcep/signal.hpp"

namespace qcep {

// Events are padded to this many frames before entering the network.
inline constexpr std::size_t kMaxFrames = 500;

// Default exponent grid for the cumulative intensity features.
std::vector<double> default_eta_grid();  // {0.2, 0.4, ..., 2.0}

// Trapezoidal approximation of the cumulative intensity integral
// of |a(t)|^eta over the record's sample grid.
double intensity(const AccelRecord& rec, double eta);

// One intensity value per (channel, eta) pair, channel-major:
// [top_x x etas, top_y x etas, bot_x x etas, bot_y x etas].
struct IntensityVector {
  std::vector<double> values;
  std::vector<double> etas;
};

IntensityVector intensity_vector(const MultiChannelRecord& rec,
                                 const std::vector<double>& etas = default_eta_grid());

// Per-event network input: top-bottom feature differences of both directions,
// zero-padded to kMaxFrames rows with a validity mask.
struct FusedTensor {
  std::vector<double> values;  // row-major, kMaxFrames x 16
  std::vector<bool> mask;      // true for rows < n_w
  std::size_t n_w = 0;         // real frame count
  std::size_t n_cols = 16;

  double at(std::size_t row, std::size_t col) const {
    return values[row * n_cols + col];
  }
};

// Row t = [top_x - bot_x (8 cols) | top_y - bot_y (8 cols)]. All four inputs
// must share n_w <= kMaxFrames and n_keep = 8.
FusedTensor fuse(const CepstralTensor& top_x, const CepstralTensor& bot_x,
                 const CepstralTensor& top_y, const CepstralTensor& bot_y);

}  // namespace qcep

#endif  // QCEP_FEATURES_HPP_
