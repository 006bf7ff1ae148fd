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

// Independent reference implementations used only by tests. These stay
// deliberately brute-force and share no code with src/.

#ifndef QCEP_TESTS_ORACLES_HPP_
#define QCEP_TESTS_ORACLES_HPP_

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracles {

// O(N^2) direct discrete Fourier transform.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = -2.0 * M_PI * static_cast<double>(k) *
                       static_cast<double>(j) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

// Inverse of the orthonormal DCT-II (i.e. orthonormal DCT-III).
inline std::vector<double> inverse_dct(const std::vector<double>& c) {
  const std::size_t n = c.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                              : std::sqrt(2.0 / static_cast<double>(n));
      acc += s * c[k] *
             std::cos(M_PI * static_cast<double>(k) *
                      (2.0 * static_cast<double>(m) + 1.0) /
                      (2.0 * static_cast<double>(n)));
    }
    out[m] = acc;
  }
  return out;
}

// Midpoint Riemann sum of f over [0, t_end] with n panels.
inline double riemann(const std::function<double(double)>& f, double t_end,
                      std::size_t n) {
  const double h = t_end / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += f((static_cast<double>(i) + 0.5) * h);
  }
  return acc * h;
}

// Linear-elastic SDOF reference (unit mass): constant-average-acceleration
// recurrence solved in closed form per substep, with linear excitation
// interpolation, downsampled back to the input grid. Independent of the
// production integrator's Newton formulation.
inline std::vector<double> refined_linear_sdof(double period, double damping,
                                               const std::vector<double>& ground,
                                               double sr, std::size_t refine) {
  const double omega = 2.0 * M_PI / period;
  const double k = omega * omega;
  const double c = 2.0 * damping * omega;
  const double dt = 1.0 / (sr * static_cast<double>(refine));
  const double k_eff = 4.0 / (dt * dt) + 2.0 * c / dt + k;

  std::vector<double> out(ground.size(), 0.0);
  double u = 0.0, v = 0.0;
  double a = ground.empty() ? 0.0 : -ground[0];
  for (std::size_t i = 0; i + 1 < ground.size(); ++i) {
    for (std::size_t s = 1; s <= refine; ++s) {
      const double w = static_cast<double>(s) / static_cast<double>(refine);
      const double p = -((1.0 - w) * ground[i] + w * ground[i + 1]);
      const double p_eff = p + (4.0 / (dt * dt) + 2.0 * c / dt) * u +
                           (4.0 / dt + c) * v + a;
      const double u_next = p_eff / k_eff;
      const double a_next =
          (4.0 / (dt * dt)) * (u_next - u) - (4.0 / dt) * v - a;
      const double v_next = v + 0.5 * dt * (a + a_next);
      u = u_next;
      v = v_next;
      a = a_next;
    }
    out[i + 1] = u;
  }
  return out;
}

}  // namespace oracles

#endif  // QCEP_TESTS_ORACLES_HPP_
