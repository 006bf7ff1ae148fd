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

#include "qcep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "qcep/error.hpp"
#include "qcep/parallel.hpp"
#include "qcep/rng.hpp"

namespace qcep {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;
}

void PierModel::validate() const {
  if (!(period_x > 0.0 && period_y > 0.0)) {
    throw DataError("pier model: periods must be > 0");
  }
  if (!(damping > 0.0 && damping < 1.0)) {
    throw DataError("pier model: damping must lie in (0, 1)");
  }
  if (!(yield_drift > 0.0)) throw DataError("pier model: yield_drift must be > 0");
  if (!(hardening >= 0.0 && hardening < 1.0)) {
    throw DataError("pier model: hardening ratio must lie in [0, 1)");
  }
  if (!(height > 0.0)) throw DataError("pier model: height must be > 0");
}

namespace {

// RBJ biquad band-pass (constant peak gain), direct form I.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  Biquad(double f0, double q, double sr) {
    const double w0 = 2.0 * kPi * f0 / sr;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b1 = 0.0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
  }

  double step(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

std::vector<double> shaped_noise(Rng& rng, std::size_t n, double f0, double sr,
                                 double ramp_frac, double flat_frac) {
  std::vector<double> out(n);
  Biquad filter(f0, 1.0, sr);
  for (std::size_t i = 0; i < n; ++i) out[i] = filter.step(rng.normal());
  const double t_rise = ramp_frac * static_cast<double>(n);
  const double t_flat = flat_frac * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    double env;
    if (x < t_rise) {
      env = x / t_rise;
    } else if (x < t_flat) {
      env = 1.0;
    } else {
      env = (static_cast<double>(n - 1) - x) / (static_cast<double>(n - 1) - t_flat);
    }
    out[i] *= std::max(env, 0.0);
  }
  return out;
}

}  // namespace

SyntheticGM generate_gm(std::uint64_t seed, double sr, double duration,
                        double intensity_scale) {
  if (!(sr >= 50.0 && sr <= 500.0)) {
    throw DataError("generate_gm: sr must lie in [50, 500] Hz");
  }
  if (!(duration >= 10.0 && duration <= 120.0)) {
    throw DataError("generate_gm: duration must lie in [10, 120] s");
  }
  if (intensity_scale < 0.0) {
    throw DataError("generate_gm: negative intensity scale");
  }

  SyntheticGM gm;
  gm.sr = sr;
  gm.duration = duration;
  gm.seed = seed;
  const auto n = static_cast<std::size_t>(std::lround(duration * sr));

  Rng rng(seed);
  // Dominant frequency varies per seed so records differ in spectral content,
  // not just amplitude.
  const double f0 = std::exp(rng.uniform(std::log(0.5), std::log(3.0)));
  gm.comp_x = shaped_noise(rng, n, f0, sr, 0.15, 0.70);
  gm.comp_y = shaped_noise(rng, n, f0, sr, 0.15, 0.70);

  double peak = 0.0;
  for (double v : gm.comp_x) peak = std::max(peak, std::fabs(v));
  for (double v : gm.comp_y) peak = std::max(peak, std::fabs(v));
  const double gain = (intensity_scale == 0.0 || peak == 0.0)
                          ? 0.0
                          : intensity_scale / peak;
  for (double& v : gm.comp_x) v *= gain;
  for (double& v : gm.comp_y) v *= gain;
  return gm;
}

SyntheticGM rotate_gm(const SyntheticGM& gm, double angle_deg) {
  const double a = angle_deg * kPi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  SyntheticGM out = gm;
  for (std::size_t i = 0; i < gm.comp_x.size(); ++i) {
    out.comp_x[i] = c * gm.comp_x[i] - s * gm.comp_y[i];
    out.comp_y[i] = s * gm.comp_x[i] + c * gm.comp_y[i];
  }
  return out;
}

namespace {

struct SdofResult {
  std::vector<double> rel_disp;
  std::vector<double> rel_accel;
};

// Bilinear kinematic-hardening SDOF (unit mass) under ground acceleration,
// average-acceleration Newmark with Newton iteration on the resisting force.
// yield_disp = +inf turns the spring purely linear.
SdofResult integrate_sdof(double period, double damping,
                          const std::vector<double>& ground, double dt,
                          double yield_disp, double hardening) {
  const double omega = 2.0 * kPi / period;
  const double k0 = omega * omega;
  const double c = 2.0 * damping * omega;
  const bool linear = !std::isfinite(yield_disp);
  const double fy = linear ? 0.0 : k0 * yield_disp;

  const double beta = 0.25;
  const double gamma = 0.5;
  const double c0 = 1.0 / (beta * dt * dt);
  const double c1 = 1.0 / (beta * dt);
  const double c2 = 1.0 / (2.0 * beta) - 1.0;
  const double dv_du = gamma / (beta * dt);

  const std::size_t n = ground.size();
  SdofResult res;
  res.rel_disp.assign(n, 0.0);
  res.rel_accel.assign(n, 0.0);

  double u = 0.0, v = 0.0, f = 0.0;
  double acc = ground.empty() ? 0.0 : -ground[0];  // initial equilibrium
  res.rel_accel[0] = acc;

  auto resisting = [&](double u_trial, double u_n, double f_n, double* k_tan) {
    if (linear) {
      if (k_tan) *k_tan = k0;
      return k0 * u_trial;
    }
    const double trial = f_n + k0 * (u_trial - u_n);
    const double hi = hardening * k0 * u_trial + (1.0 - hardening) * fy;
    const double lo = hardening * k0 * u_trial - (1.0 - hardening) * fy;
    if (trial > hi) {
      if (k_tan) *k_tan = hardening * k0;
      return hi;
    }
    if (trial < lo) {
      if (k_tan) *k_tan = hardening * k0;
      return lo;
    }
    if (k_tan) *k_tan = k0;
    return trial;
  };

  const double tol = 1e-10 * std::max(1.0, k0);
  for (std::size_t i = 1; i < n; ++i) {
    const double p = -ground[i];
    double u_next = u;  // warm start from the committed state
    int iter = 0;
    for (;; ++iter) {
      if (iter >= 50) {
        throw DivergenceError("sdof integration: Newton failed to converge at step " +
                              std::to_string(i));
      }
      const double a_next = c0 * (u_next - u) - c1 * v - c2 * acc;
      const double v_next = v + dt * ((1.0 - gamma) * acc + gamma * a_next);
      double k_tan = k0;
      const double f_next = resisting(u_next, u, f, &k_tan);
      const double residual = a_next + c * v_next + f_next - p;
      if (std::fabs(residual) <= tol) break;
      u_next -= residual / (c0 + c * dv_du + k_tan);
    }
    const double a_next = c0 * (u_next - u) - c1 * v - c2 * acc;
    const double v_next = v + dt * ((1.0 - gamma) * acc + gamma * a_next);
    f = resisting(u_next, u, f, nullptr);
    u = u_next;
    v = v_next;
    acc = a_next;
    res.rel_disp[i] = u;
    res.rel_accel[i] = acc;
  }
  return res;
}

}  // namespace

EventSample simulate_response(const PierModel& model, const SyntheticGM& gm) {
  model.validate();
  if (gm.comp_x.size() != gm.comp_y.size() || gm.comp_x.empty()) {
    throw DataError("simulate_response: malformed ground motion");
  }
  const double dt = 1.0 / gm.sr;
  const double uy = model.yield_drift * model.height;

  const SdofResult rx = integrate_sdof(model.period_x, model.damping, gm.comp_x,
                                       dt, uy, model.hardening);
  const SdofResult ry = integrate_sdof(model.period_y, model.damping, gm.comp_y,
                                       dt, uy, model.hardening);

  double peak = 0.0;
  for (std::size_t i = 0; i < rx.rel_disp.size(); ++i) {
    peak = std::max(peak, std::hypot(rx.rel_disp[i], ry.rel_disp[i]));
  }

  EventSample ev;
  ev.drift_ratio = peak / model.height;
  const std::size_t n = gm.comp_x.size();
  auto make_channel = [&](std::vector<double> samples, const char* id) {
    AccelRecord rec;
    rec.samples = std::move(samples);
    rec.sr = gm.sr;
    rec.channel_id = id;
    return rec;
  };
  std::vector<double> top_x(n), top_y(n);
  for (std::size_t i = 0; i < n; ++i) {
    top_x[i] = gm.comp_x[i] + rx.rel_accel[i];
    top_y[i] = gm.comp_y[i] + ry.rel_accel[i];
  }
  ev.channels.top_x = make_channel(std::move(top_x), "top_x");
  ev.channels.top_y = make_channel(std::move(top_y), "top_y");
  ev.channels.bot_x = make_channel(gm.comp_x, "bot_x");
  ev.channels.bot_y = make_channel(gm.comp_y, "bot_y");
  return ev;
}

std::vector<double> integrate_linear_sdof(double period, double damping,
                                          const std::vector<double>& ground_accel,
                                          double sr, std::size_t substeps) {
  if (substeps < 1) throw DataError("integrate_linear_sdof: substeps must be >= 1");
  std::vector<double> ground;
  if (substeps == 1) {
    ground = ground_accel;
  } else {
    ground.reserve((ground_accel.size() - 1) * substeps + 1);
    for (std::size_t i = 0; i + 1 < ground_accel.size(); ++i) {
      for (std::size_t s = 0; s < substeps; ++s) {
        const double w = static_cast<double>(s) / static_cast<double>(substeps);
        ground.push_back((1.0 - w) * ground_accel[i] + w * ground_accel[i + 1]);
      }
    }
    ground.push_back(ground_accel.back());
  }
  const double dt = 1.0 / (sr * static_cast<double>(substeps));
  SdofResult res = integrate_sdof(period, damping, ground, dt,
                                  std::numeric_limits<double>::infinity(), 0.0);
  if (substeps == 1) return res.rel_disp;
  std::vector<double> out(ground_accel.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = res.rel_disp[i * substeps];
  return out;
}

std::vector<EventSample> generate_events(const SynthDatasetConfig& cfg) {
  cfg.pier.validate();
  if (cfg.gm_count == 0 || cfg.angles_deg.empty() || cfg.scale_factors.empty()) {
    throw DataError("generate_events: empty dataset dimensions");
  }

  const std::size_t per_gm = cfg.angles_deg.size() * cfg.scale_factors.size();
  const std::size_t total = cfg.gm_count * per_gm;
  std::vector<EventSample> events(total);

  parallel_for(total, [&](std::size_t idx) {
    const std::size_t gm_index = idx / per_gm;
    const std::size_t rest = idx % per_gm;
    const std::size_t angle_index = rest / cfg.scale_factors.size();
    const std::size_t scale_index = rest % cfg.scale_factors.size();

    const std::uint64_t gm_seed = derive_seed(cfg.seed, gm_index);
    Rng gm_rng(derive_seed(gm_seed, 0xbeef));
    const double base_pga = gm_rng.uniform(cfg.base_pga_lo, cfg.base_pga_hi);
    const double angle = cfg.angles_deg[angle_index];
    double scale = cfg.scale_factors[scale_index];

    EventSample ev;
    for (int attempt = 0;; ++attempt) {
      SyntheticGM gm = generate_gm(gm_seed, cfg.sr, cfg.duration_s, base_pga * scale);
      ev = simulate_response(cfg.pier, rotate_gm(gm, angle));
      if (ev.drift_ratio <= cfg.max_drift || attempt >= 16) break;
      scale *= 0.6;  // regenerate over-drift events at a lower scale
    }
    if (cfg.noise_std > 0.0) {
      Rng noise_rng(derive_seed(gm_seed, 0x7105e + idx));
      for (AccelRecord* ch : {&ev.channels.top_x, &ev.channels.top_y,
                              &ev.channels.bot_x, &ev.channels.bot_y}) {
        for (double& v : ch->samples) v += cfg.noise_std * noise_rng.normal();
      }
    }

    ev.gm_id = gm_index;
    ev.angle_deg = angle;
    ev.scale = scale;
    char buf[64];
    std::snprintf(buf, sizeof buf, "gm%03zu_a%03d_s%zu", gm_index,
                  static_cast<int>(std::lround(angle)), scale_index);
    ev.event_id = buf;
    events[idx] = std::move(ev);
  });
  return events;
}

}  // namespace qcep
