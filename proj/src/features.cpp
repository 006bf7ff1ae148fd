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

#include "qcep/features.hpp"

#include <cmath>

#include "qcep/error.hpp"

namespace qcep {

std::vector<double> default_eta_grid() {
  std::vector<double> etas;
  for (int i = 1; i <= 10; ++i) etas.push_back(0.2 * i);
  return etas;
}

double intensity(const AccelRecord& rec, double eta) {
  if (!(eta > 0.0)) throw DataError("intensity: eta must be > 0");
  rec.validate();

  const double dt = 1.0 / rec.sr;
  const std::size_t n = rec.samples.size();
  if (n == 1) return 0.0;

  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::pow(std::fabs(rec.samples[i]), eta);
    acc += (i == 0 || i + 1 == n) ? 0.5 * v : v;
  }
  return acc * dt;
}

IntensityVector intensity_vector(const MultiChannelRecord& rec,
                                 const std::vector<double>& etas) {
  rec.validate();
  if (etas.empty()) throw DataError("intensity_vector: empty eta grid");

  IntensityVector out;
  out.etas = etas;
  out.values.reserve(4 * etas.size());
  for (const AccelRecord* ch : {&rec.top_x, &rec.top_y, &rec.bot_x, &rec.bot_y}) {
    for (double eta : etas) out.values.push_back(intensity(*ch, eta));
  }
  return out;
}

FusedTensor fuse(const CepstralTensor& top_x, const CepstralTensor& bot_x,
                 const CepstralTensor& top_y, const CepstralTensor& bot_y) {
  const std::size_t n_w = top_x.n_w;
  for (const CepstralTensor* t : {&top_x, &bot_x, &top_y, &bot_y}) {
    t->validate();
    if (t->n_w != n_w || t->n_keep != 8) {
      throw DataError("fuse: all four tensors must share n_w and have 8 coefficients");
    }
  }
  if (n_w > kMaxFrames) {
    throw DataError("fuse: event has " + std::to_string(n_w) +
                    " frames, exceeding the " + std::to_string(kMaxFrames) +
                    "-frame cap");
  }

  FusedTensor out;
  out.n_w = n_w;
  out.values.assign(kMaxFrames * out.n_cols, 0.0);
  out.mask.assign(kMaxFrames, false);
  for (std::size_t t = 0; t < n_w; ++t) {
    out.mask[t] = true;
    double* row = &out.values[t * out.n_cols];
    for (std::size_t k = 0; k < 8; ++k) {
      row[k] = top_x.at(t, k) - bot_x.at(t, k);
      row[8 + k] = top_y.at(t, k) - bot_y.at(t, k);
    }
  }
  return out;
}

}  // namespace qcep
