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

// Central finite-difference check of the analytic gradients. Parameters whose
// +h/-h evaluations cross a ReLU kink (any candidate activation changes
// on/off state) or the absolute-error kink (any per-sample error changes
// sign) are skipped: the loss is not differentiable there and central
// differences are meaningless.

#ifndef QCEP_TESTS_GRADCHECK_HPP_
#define QCEP_TESTS_GRADCHECK_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "qcep/neural.hpp"
#include "qcep/rng.hpp"

namespace gradcheck {

struct Result {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double worst_rel = 0.0;
  std::size_t failures = 0;
};

// Kink signature of one forward evaluation: the on/off state of every valid
// candidate activation plus the sign of every per-sample error.
inline std::vector<std::int8_t> kink_signature(const qcep::ForwardTrace& trace,
                                               const qcep::Batch& batch,
                                               const std::vector<double>& targets) {
  std::vector<std::int8_t> sig;
  for (const auto& layer : trace.gru) {
    const std::size_t cells = layer.c.size() / (batch.t_max * batch.batch);
    for (std::size_t t = 0; t < batch.t_max; ++t) {
      for (std::size_t b = 0; b < batch.batch; ++b) {
        if (t >= batch.lengths[b]) continue;
        for (std::size_t i = 0; i < cells; ++i) {
          sig.push_back(layer.c[(t * batch.batch + b) * cells + i] > 0.0 ? 1 : 0);
        }
      }
    }
  }
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const double e = trace.yhat[b] - targets[b];
    sig.push_back(e > 0.0 ? 1 : (e < 0.0 ? -1 : 0));
  }
  return sig;
}

inline Result check(qcep::Network& net, const qcep::Batch& batch,
                    const std::vector<double>& targets,
                    std::uint64_t dropout_seed, double step, double tol) {
  using qcep::ForwardTrace;
  using qcep::RunMode;

  const double norm = static_cast<double>(batch.batch);
  std::vector<double> grad(net.param_count(), 0.0);
  {
    qcep::Rng rng(dropout_seed);
    ForwardTrace trace;
    net.forward(batch, RunMode::kTrain, &rng, &trace);
    net.backward_mae(batch, trace, targets, norm, grad);
  }

  // Loss evaluation with the identical dropout mask (same seed, same draws).
  auto loss_at = [&](std::vector<std::int8_t>* sig) {
    qcep::Rng rng(dropout_seed);
    ForwardTrace trace;
    const std::vector<double> yhat =
        net.forward(batch, RunMode::kTrain, &rng, &trace);
    if (sig) *sig = kink_signature(trace, batch, targets);
    double acc = 0.0;
    for (std::size_t b = 0; b < yhat.size(); ++b) {
      acc += std::fabs(yhat[b] - targets[b]);
    }
    return acc / norm;
  };

  Result res;
  std::vector<double>& theta = net.params();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    std::vector<std::int8_t> sig_plus, sig_minus;
    theta[i] = saved + step;
    const double up = loss_at(&sig_plus);
    theta[i] = saved - step;
    const double down = loss_at(&sig_minus);
    theta[i] = saved;

    if (sig_plus != sig_minus) {
      ++res.skipped;
      continue;
    }
    const double fd = (up - down) / (2.0 * step);
    const double err = std::fabs(grad[i] - fd);
    const double scale = std::max(std::fabs(grad[i]), std::fabs(fd));
    const double rel = scale > 0.0 ? err / scale : 0.0;
    ++res.checked;
    if (err > 1e-10 && rel > tol) {
      ++res.failures;
    }
    if (err > 1e-10) res.worst_rel = std::max(res.worst_rel, rel);
  }
  return res;
}

}  // namespace gradcheck

#endif  // QCEP_TESTS_GRADCHECK_HPP_
