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

#ifndef QCEP_SYNTH_HPP_
#define QCEP_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "qcep/signal.hpp"

namespace qcep {

// Single-pier stand-in structure: one bilinear-hysteretic SDOF per direction.
struct PierModel {
  double period_x = 0.8;    // s
  double period_y = 1.2;    // s
  double damping = 0.05;    // fraction of critical
  double yield_drift = 0.01;  // fraction of height
  double hardening = 0.05;  // post-yield stiffness ratio
  double height = 8.0;      // m

  void validate() const;
};

// Bi-directional synthetic ground motion: band-limited filtered white noise
// under a trapezoidal amplitude envelope, peak-normalized so the larger of
// the two component peaks equals intensity_scale (m/s^2).
struct SyntheticGM {
  std::vector<double> comp_x, comp_y;
  double sr = 100.0;
  double duration = 40.0;
  std::uint64_t seed = 0;
};

SyntheticGM generate_gm(std::uint64_t seed, double sr, double duration,
                        double intensity_scale);

// Rotates the component pair by angle_deg (counterclockwise).
SyntheticGM rotate_gm(const SyntheticGM& gm, double angle_deg);

// One simulated earthquake realization: four sensor channels plus metadata
// and the drift-ratio label.
struct EventSample {
  std::string event_id;
  std::uint64_t gm_id = 0;
  double angle_deg = 0.0;
  double scale = 1.0;
  double drift_ratio = 0.0;  // max resultant relative displacement / height
  MultiChannelRecord channels;
};

// Integrates the bilinear-hysteretic SDOF per direction with the
// average-acceleration Newmark scheme (gamma = 1/2, beta = 1/4) and Newton
// iteration on the resisting force. Bottom channels echo the ground
// acceleration; top channels add the relative response.
EventSample simulate_response(const PierModel& model, const SyntheticGM& gm);

// Same integrator with yielding disabled (pure linear spring), optionally at
// a refined time step (substeps > 1 interpolates the excitation linearly).
// Returns the relative displacement history of one direction.
std::vector<double> integrate_linear_sdof(double period, double damping,
                                          const std::vector<double>& ground_accel,
                                          double sr, std::size_t substeps = 1);

// Dataset layout: gm_count x |angles| x scale factors per GM, all derived
// from one root seed. Events whose drift exceeds max_drift are regenerated
// at reduced scale.
struct SynthDatasetConfig {
  std::uint64_t seed = 1;
  std::size_t gm_count = 30;
  std::vector<double> angles_deg = {0, 60, 90, 120, 150};
  std::vector<double> scale_factors = {0.5, 1.0, 2.0, 4.0};
  double sr = 100.0;
  double duration_s = 40.0;
  double base_pga_lo = 0.4;   // m/s^2, per-GM base intensity range
  double base_pga_hi = 2.5;
  double max_drift = 0.10;
  double noise_std = 0.0;     // optional additive sensor noise, m/s^2
  PierModel pier;
};

// Simulates every (gm, angle, scale) combination. Deterministic per seed and
// independent of scheduling: per-event seeds come from derive_seed.
std::vector<EventSample> generate_events(const SynthDatasetConfig& cfg);

}  // namespace qcep

#endif  // QCEP_SYNTH_HPP_
