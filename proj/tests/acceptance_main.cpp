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

// Acceptance suite: each criterion below runs end to end and prints a single
// PASS/FAIL line. The process exit code is the number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "qcep/cepstral.hpp"
#include "qcep/dataset.hpp"
#include "qcep/features.hpp"
#include "qcep/fft.hpp"
#include "qcep/neural.hpp"
#include "qcep/rng.hpp"
#include "qcep/signal.hpp"
#include "qcep/synth.hpp"
#include "qcep/training.hpp"

using namespace qcep;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  std::string what;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw Failure{msg};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(in.good(), "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// 1. FFT oracle: 200 random frames (lengths 8..512) against the direct DFT,
//    relative error <= 1e-9, plus the Parseval identity. Runtime < 10 s.
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 8 + rng.below(505);
    std::size_t n_fft = 8;
    while (n_fft < len) n_fft <<= 1;
    std::vector<double> frame(len);
    for (double& v : frame) v = rng.uniform(-2.0, 2.0);

    const auto got = fft(frame, n_fft);
    std::vector<double> padded = frame;
    padded.resize(n_fft, 0.0);
    const auto want = oracles::direct_dft(padded);

    double scale = 0.0;
    for (const auto& w : want) scale = std::max(scale, std::abs(w));
    for (std::size_t k = 0; k < n_fft; ++k) {
      require(std::abs(got[k] - want[k]) <= 1e-9 * scale,
              "fft/dft mismatch at length " + std::to_string(len));
    }

    double freq_energy = 0.0, time_energy = 0.0;
    for (const auto& c : got) freq_energy += std::norm(c);
    freq_energy /= static_cast<double>(n_fft);
    for (double v : frame) time_energy += v * v;
    require(std::fabs(freq_energy - time_energy) <= 1e-9 * time_energy,
            "parseval identity violated");
  }
  require(seconds_since(t0) < 10.0, "fft oracle suite exceeded 10 s");
}

// ---------------------------------------------------------------------------
// 2. Spectrum and Mel point checks: impulse periodogram = 1/512 in every bin;
//    hz_to_mel(700) = 2595*log10(2); mel/hz round trip < 1e-9 over 100 points.
void criterion_2() {
  std::vector<double> impulse(512, 0.0);
  impulse[0] = 1.0;
  const Periodogram p = periodogram(impulse, 512, 100.0);
  require(p.bins.size() == 257, "impulse periodogram has wrong bin count");
  for (double b : p.bins) {
    require(std::fabs(b - 1.0 / 512.0) <= 1e-15, "impulse periodogram bin != 1/512");
  }

  const double want = 2595.0 * std::log10(2.0);
  require(std::fabs(hz_to_mel(700.0) - want) <= 1e-12 * want,
          "hz_to_mel(700) mismatch");

  for (int i = 0; i < 100; ++i) {
    const double hz = 10.0 + 990.0 * i / 99.0;
    const double back = mel_to_hz(hz_to_mel(hz));
    require(std::fabs(back - hz) <= 1e-9 * hz, "mel/hz round trip error");
    const double mel = 5.0 + 15.0 * i;
    require(std::fabs(hz_to_mel(mel_to_hz(mel)) - mel) <= 1e-9 * mel,
            "hz/mel round trip error");
  }
}

// ---------------------------------------------------------------------------
// 3. Filter-bank structure across SR in {50, 100, 200, 500} Hz: peak exactly
//    1.0, anchors equally spaced in Mel within 1e-9, full coverage between
//    the outer anchors.
void criterion_3() {
  for (double sr : {50.0, 100.0, 200.0, 500.0}) {
    const FilterBank fb = build_filterbank(sr, 26, 512);
    const double gap = fb.mel_points[1] - fb.mel_points[0];
    for (std::size_t j = 0; j + 1 < fb.mel_points.size(); ++j) {
      require(std::fabs((fb.mel_points[j + 1] - fb.mel_points[j]) - gap) <=
                  1e-9 * gap,
              "mel anchors not equally spaced at sr " + std::to_string(sr));
    }
    for (std::size_t k = 0; k < fb.n_fl; ++k) {
      double peak = 0.0;
      for (double w : fb.weights[k]) peak = std::max(peak, w);
      require(peak == 1.0, "filter peak != 1.0");
    }
    for (std::size_t b = fb.bin_points.front() + 1; b < fb.bin_points.back(); ++b) {
      double total = 0.0;
      for (const auto& row : fb.weights) total += row[b];
      require(total > 0.0, "coverage hole at sr " + std::to_string(sr));
    }
  }
}

// ---------------------------------------------------------------------------
// 4. DCT: orthonormal energy preservation per frame < 1e-9; a constant row
//    maps to a single nonzero coefficient sqrt(N).
void criterion_4() {
  Rng rng(104);
  CepstralTensor t;
  t.kind = CepstralKind::kMfb;
  t.n_w = 50;
  t.n_keep = 8;
  t.values.resize(400);
  for (double& v : t.values) v = rng.normal();
  const CepstralTensor c = dct_mfcc(t);
  for (std::size_t f = 0; f < t.n_w; ++f) {
    double in = 0.0, out = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
      in += t.at(f, k) * t.at(f, k);
      out += c.at(f, k) * c.at(f, k);
    }
    require(std::fabs(in - out) <= 1e-9 * std::max(in, 1e-30),
            "dct energy not preserved");
  }

  CepstralTensor ones;
  ones.kind = CepstralKind::kMfb;
  ones.n_w = 1;
  ones.n_keep = 8;
  ones.values.assign(8, 1.0);
  const CepstralTensor spike = dct_mfcc(ones);
  require(std::fabs(spike.at(0, 0) - std::sqrt(8.0)) <= 1e-12,
          "constant row c0 != sqrt(N)");
  for (std::size_t k = 1; k < 8; ++k) {
    require(std::fabs(spike.at(0, k)) <= 1e-12, "constant row leaks energy");
  }
}

// ---------------------------------------------------------------------------
// 5. Cumulative intensity: scaling a random record by c in {0.5, 2, 10}
//    scales each I^eta by exactly c^eta; |sin| integral = 2/pi within 1e-4.
void criterion_5() {
  Rng rng(105);
  AccelRecord rec;
  rec.sr = 100.0;
  rec.channel_id = "r";
  rec.samples.resize(700);
  for (double& v : rec.samples) v = rng.normal();

  for (double eta : default_eta_grid()) {
    const double base = intensity(rec, eta);
    for (double c : {0.5, 2.0, 10.0}) {
      AccelRecord scaled = rec;
      for (double& v : scaled.samples) v *= c;
      const double want = std::pow(c, eta) * base;
      require(std::fabs(intensity(scaled, eta) - want) <= 1e-12 * want,
              "intensity homogeneity violated");
    }
  }

  AccelRecord sine;
  sine.sr = 1000.0;
  sine.channel_id = "s";
  sine.samples.resize(1001);
  for (std::size_t i = 0; i < sine.samples.size(); ++i) {
    sine.samples[i] = std::sin(2.0 * M_PI * static_cast<double>(i) / 1000.0);
  }
  require(std::fabs(intensity(sine, 1.0) - 2.0 / M_PI) <= 1e-4,
          "sine integral misses 2/pi");
}

// ---------------------------------------------------------------------------
// 6. Fusion and masking: padded 500x16 shape with an exactly-zero padded
//    region, and bit-identical predictions under extra padding.
void criterion_6() {
  SynthDatasetConfig scfg;
  const SyntheticGM gm = generate_gm(1006, scfg.sr, scfg.duration_s, 1.2);
  const EventSample ev = simulate_response(scfg.pier, gm);
  const FusedTensor fused = extract_fused(ev.channels, FeatureKind::kMfb, {});

  require(fused.values.size() == 500 * 16, "fused tensor is not 500x16");
  require(fused.n_cols == 16, "fused tensor is not 16 wide");
  require(fused.n_w == 99, "40 s at 100 Hz should give 99 frames");
  for (std::size_t r = fused.n_w; r < kMaxFrames; ++r) {
    require(!fused.mask[r], "mask true in the padded region");
    for (std::size_t c = 0; c < 16; ++c) {
      require(fused.at(r, c) == 0.0, "padded region not exactly zero");
    }
  }
  for (std::size_t r = 0; r < fused.n_w; ++r) {
    require(fused.mask[r], "mask false for a valid row");
  }

  Network net{NetworkConfig{}};
  Rng rng(1060);
  net.init_params(rng);

  auto padded_batch = [&](std::size_t t_max) {
    Batch b;
    b.batch = 1;
    b.t_max = t_max;
    b.features = 16;
    b.lengths = {fused.n_w};
    b.data.assign(t_max * 16, 0.0);
    for (std::size_t t = 0; t < fused.n_w; ++t) {
      for (std::size_t c = 0; c < 16; ++c) b.data[t * 16 + c] = fused.at(t, c);
    }
    return b;
  };

  const double tight = net.forward(padded_batch(fused.n_w), RunMode::kEval)[0];
  const double at500 = net.forward(padded_batch(500), RunMode::kEval)[0];
  const double at520 = net.forward(padded_batch(520), RunMode::kEval)[0];
  require(tight == at500 && at500 == at520,
          "prediction changed under zero padding");
  require(tight > 0.0 && tight < 1.0, "prediction outside (0,1)");
}

// ---------------------------------------------------------------------------
// 7. Gradient suite: analytic vs central finite differences on the miniature
//    network (GRU {3,4}, dense {5}), 5 seeds, rel err <= 1e-5 on non-kink
//    parameters. Runtime < 60 s.
void criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  NetworkConfig cfg;
  cfg.input_dim = 4;
  cfg.gru_units = {3, 4};
  cfg.dense_units = {5};
  cfg.dropout_rate = 0.05;

  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Network net(cfg);
    Rng rng(seed);
    net.init_params(rng);

    Batch batch;
    batch.batch = 2;
    batch.t_max = 2;
    batch.features = 4;
    batch.lengths = {2, 1};
    batch.data.resize(2 * 2 * 4);
    Rng data_rng(seed + 900);
    for (double& v : batch.data) v = data_rng.normal();
    const std::vector<double> targets{0.3, 0.7};

    const auto res = gradcheck::check(net, batch, targets, seed * 31, 1e-5, 1e-5);
    require(res.failures == 0,
            "gradient mismatch on seed " + std::to_string(seed) +
                " (worst rel " + std::to_string(res.worst_rel) + ")");
    require(res.checked > 0, "no parameters checked");
    checked += res.checked;
  }
  require(checked > 500, "gradient suite checked too few parameters");
  require(seconds_since(t0) < 60.0, "gradient suite exceeded 60 s");
}

// ---------------------------------------------------------------------------
// 8. Overfit floor: the full drift architecture reaches training MAE < 0.01
//    (amplified units) on 16 fixed synthetic samples within 2000 epochs and
//    10 minutes.
void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();

  SynthDatasetConfig scfg;
  scfg.seed = 108;
  scfg.gm_count = 4;
  scfg.angles_deg = {0, 60};
  scfg.scale_factors = {1.0, 2.5};
  scfg.duration_s = 12.0;
  const std::vector<EventSample> events = generate_events(scfg);
  require(events.size() == 16, "expected 16 fixed samples");

  std::vector<FusedTensor> tensors;
  std::vector<double> targets;
  for (const EventSample& ev : events) {
    tensors.push_back(extract_fused(ev.channels, FeatureKind::kMfb, {}));
    targets.push_back(10.0 * ev.drift_ratio);
  }
  std::vector<const FusedTensor*> ptrs;
  for (const FusedTensor& t : tensors) ptrs.push_back(&t);
  const Batch batch = make_fused_batch(ptrs);

  Network net{NetworkConfig{}};
  Rng init_rng(1080);
  net.init_params(init_rng);
  NadamState state(net.param_count());
  const NadamConfig opt{};  // lr 2e-3

  std::vector<double> grad(net.param_count());
  double mae = 1.0;
  std::size_t epoch = 0;
  for (; epoch < 2000; ++epoch) {
    ForwardTrace trace;
    Rng dropout_rng(derive_seed(1081, epoch));
    net.forward(batch, RunMode::kTrain, &dropout_rng, &trace);
    std::fill(grad.begin(), grad.end(), 0.0);
    const std::vector<double> errs =
        net.backward_mae(batch, trace, targets, 16.0, grad);
    mae = 0.0;
    for (double e : errs) mae += e;
    mae /= 16.0;
    if (mae < 0.01) break;
    nadam_step(net.params(), grad, state, opt);
  }
  std::cout << "  [info] overfit floor: train MAE " << mae << " after "
            << epoch << " epochs, " << seconds_since(t0) << " s\n";
  require(mae < 0.01, "training MAE stayed at " + std::to_string(mae) +
                          " after 2000 epochs");
  require(seconds_since(t0) < 600.0, "overfit run exceeded 10 minutes");
}

// ---------------------------------------------------------------------------
// 9. End-to-end three-feature comparison on the default 600-event dataset:
//    two full pipeline runs with the same seed must each finish in < 30 min
//    and produce byte-identical report.json and scatter CSVs. The soft
//    expectation (MFB MAE <= intensity MAE) is reported, not gated.
void criterion_9() {
  const fs::path root = fs::temp_directory_path() / "qcep_acceptance_e2e";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "cli.log";

  auto run = [&](const std::string& args) {
    const std::string cmd =
        std::string(QCEP_BIN) + " " + args + " >>" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    require(status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0,
            "pipeline command failed: " + args + " (see " + log.string() + ")");
  };

  for (const char* tag : {"run1", "run2"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path base = root / tag;
    run("synth --seed 11 --out " + (base / "data").string());
    for (const char* kind : {"mfb", "mfcc", "intensity"}) {
      run("extract --manifest " + (base / "data" / "manifest.json").string() +
          " --feature " + kind + " --out " + (base / ("feat_" + std::string(kind))).string());
      run("train --features " + (base / ("feat_" + std::string(kind))).string() +
          " --seed 11 --out " + (base / ("train_" + std::string(kind))).string());
      run("evaluate --features " + (base / ("feat_" + std::string(kind))).string() +
          " --checkpoint " + (base / ("train_" + std::string(kind))).string() +
          " --out " + (base / ("eval_" + std::string(kind))).string());
    }
    run("report --out " + (base / "report").string() + " --eval " +
        (base / "eval_mfb").string() + " --eval " + (base / "eval_mfcc").string() +
        " --eval " + (base / "eval_intensity").string());
    const double elapsed = seconds_since(t0);
    std::cout << "  [info] pipeline " << tag << " took " << elapsed << " s\n";
    require(elapsed < 1800.0, std::string(tag) + " exceeded 30 minutes");
  }

  require(slurp(root / "run1" / "report" / "report.json") ==
              slurp(root / "run2" / "report" / "report.json"),
          "report.json differs between same-seed runs");
  for (const char* kind : {"mfb", "mfcc", "intensity"}) {
    const std::string name = "scatter_" + std::string(kind) + ".csv";
    require(slurp(root / "run1" / ("eval_" + std::string(kind)) / name) ==
                slurp(root / "run2" / ("eval_" + std::string(kind)) / name),
            name + " differs between same-seed runs");
  }

  const json report = json::parse(slurp(root / "run1" / "report" / "report.json"));
  const double mfb = report.at("features").at("mfb").at("test_mae_percent");
  const double mfcc = report.at("features").at("mfcc").at("test_mae_percent");
  const double intensity = report.at("features").at("intensity").at("test_mae_percent");
  std::cout << "  [info] test MAE (%): mfb " << mfb << ", mfcc " << mfcc
            << ", intensity " << intensity << "\n";
  std::cout << "  [info] soft expectation mfb <= intensity: "
            << (mfb <= intensity ? "met" : "NOT met (reported, not gated)") << "\n";
}

// ---------------------------------------------------------------------------
// 10. Split integrity: a 180-GM universe yields a 144-GM training pool and
//     36 test GMs, and no GM id crosses splits across 100 seeds.
void criterion_10() {
  std::vector<std::uint64_t> ids(180);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = 1000 + i;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SplitPlan plan = split_by_ground_motion(ids, seed);
    require(plan.train_gm_ids.size() + plan.val_gm_ids.size() == 144,
            "training pool is not 144 GMs");
    require(plan.test_gm_ids.size() == 36, "test split is not 36 GMs");
    plan.assert_disjoint();
    std::size_t total = plan.train_gm_ids.size() + plan.val_gm_ids.size() +
                        plan.test_gm_ids.size();
    require(total == 180, "split does not cover the id universe");
  }
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<void()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "fft matches the direct dft oracle with parseval", criterion_1},
      {2, "periodogram and mel point checks", criterion_2},
      {3, "filter-bank structure across sampling rates", criterion_3},
      {4, "orthonormal dct energy preservation", criterion_4},
      {5, "cumulative-intensity homogeneity and sine integral", criterion_5},
      {6, "fusion shape, masking, and padding invariance", criterion_6},
      {7, "analytic gradients vs finite differences", criterion_7},
      {8, "overfit floor on 16 fixed samples", criterion_8},
      {9, "deterministic end-to-end three-feature comparison", criterion_9},
      {10, "ground-motion split integrity over 100 seeds", criterion_10},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn();
      std::cout << "[PASS] criterion " << c.number << ": " << c.name << " ("
                << seconds_since(t0) << " s)\n";
    } catch (const Failure& f) {
      ++failures;
      std::cout << "[FAIL] criterion " << c.number << ": " << c.name << " -- "
                << f.what << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] criterion " << c.number << ": " << c.name
                << " -- unexpected error: " << e.what() << "\n";
    }
    std::cout.flush();
  }
  return failures;
}
