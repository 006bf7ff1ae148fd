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

#ifndef QCEP_NEURAL_HPP_
#define QCEP_NEURAL_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qcep/features.hpp"
#include "qcep/rng.hpp"

namespace qcep {

enum class RunMode { kTrain, kEval };

// Drift regression network: a masked stack of GRU layers with ReLU candidate
// activations feeding a tanh dense bottleneck with dropout and a sigmoid
// scalar head. With gru_units empty the input (one row per sample) goes
// straight to the bottleneck, which is how the cumulative-intensity
// benchmark features are consumed.
struct NetworkConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> gru_units = {50, 60, 70, 80, 90, 100};
  std::vector<std::size_t> dense_units = {2000, 2000};
  double dropout_rate = 0.05;  // after the first dense layer, inverted scaling
};

// A batch of variable-length sequences, compacted to the longest valid
// length and stored time-major: data[(t * batch + b) * features]. Rows past
// a sample's length are zero.
struct Batch {
  std::vector<double> data;
  std::vector<std::size_t> lengths;
  std::size_t batch = 0;
  std::size_t t_max = 0;
  std::size_t features = 0;

  const double* step(std::size_t t) const {
    return &data[t * batch * features];
  }
};

Batch make_fused_batch(std::span<const FusedTensor* const> events);
Batch make_vector_batch(std::span<const std::vector<double>* const> rows);

// Everything backward needs from a forward pass. GRU arrays are time-major
// like Batch: index (t * batch + b) * units; only rows with t < lengths[b]
// are meaningful.
struct ForwardTrace {
  struct GruTrace {
    std::vector<double> z, r, c, h;
  };
  std::vector<GruTrace> gru;
  std::vector<double> bottleneck_in;           // batch x bottleneck input dim
  std::vector<std::vector<double>> dense_act;  // per dense layer: batch x units
  std::vector<double> dropout_mask;            // batch x dense0 units; empty in eval
  std::vector<double> logits;                  // batch
  std::vector<double> yhat;                    // batch
  RunMode mode = RunMode::kEval;
};

// Spans into the flat parameter vector for one GRU layer.
struct GruParamView {
  std::span<const double> w_z, w_r, w_h;  // units x input_dim, row-major
  std::span<const double> u_z, u_r, u_h;  // units x units
  std::span<const double> b_z, b_r, b_h;  // units
  std::size_t units = 0;
  std::size_t input_dim = 0;
};

// One step of the GRU recurrence for a single sample:
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   c = relu(W_h x + U_h (r . h) + b_h)
//   h' = (1 - z) . h + z . c
void gru_cell(const GruParamView& p, std::span<const double> x,
              std::span<const double> h_prev, std::span<double> h_out);

class Network {
 public:
  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }
  std::size_t param_count() const { return theta_.size(); }
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

  // Glorot-uniform input kernels, orthogonal recurrent kernels, zero biases.
  void init_params(Rng& rng);

  GruParamView gru_view(std::size_t layer) const;

  // Predictions for a batch, one sigmoid output per sample in (0, 1).
  // Train mode applies dropout and requires an RNG; pass a trace to keep the
  // activations needed by backward_mae. Rejects samples with length 0.
  std::vector<double> forward(const Batch& batch, RunMode mode,
                              Rng* dropout_rng = nullptr,
                              ForwardTrace* trace = nullptr) const;

  double predict(const FusedTensor& input) const;
  double predict_vector(const std::vector<double>& features) const;

  // Accumulates d(mean absolute error)/d(theta) into grad for every sample in
  // the batch, normalizing each sample's contribution by loss_norm (the full
  // batch size when gradients are summed over several chunks). Returns the
  // per-sample absolute errors.
  std::vector<double> backward_mae(const Batch& batch, const ForwardTrace& trace,
                                   std::span<const double> targets,
                                   double loss_norm,
                                   std::span<double> grad) const;

 private:
  struct View {
    std::size_t offset = 0, rows = 0, cols = 0;
    std::size_t size() const { return rows * cols; }
  };
  struct GruViews {
    View w[3], u[3], b[3];  // order: z, r, h
    std::size_t units = 0, in = 0;
  };
  struct DenseViews {
    View w, b;
  };

  std::size_t bottleneck_input_dim() const;
  const double* at(const View& v) const { return theta_.data() + v.offset; }
  double* at(const View& v) { return theta_.data() + v.offset; }

  NetworkConfig cfg_;
  std::vector<double> theta_;
  std::vector<GruViews> gru_views_;
  std::vector<DenseViews> dense_views_;
  DenseViews head_views_;
};

// |y_hat - y|; the batch overload is the mean over samples.
double mae_loss(double y_hat, double y);
double mae_loss(std::span<const double> y_hat, std::span<const double> y);

// Nesterov-Adam parameter update.
struct NadamConfig {
  double lr = 2.0e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct NadamState {
  std::vector<double> m, v;
  long long step = 0;  // completed updates

  explicit NadamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void nadam_step(std::span<double> theta, std::span<const double> grad,
                NadamState& state, const NadamConfig& cfg);

// QNN1 checkpoint: magic, layer spec, then the flat parameter vector as
// little-endian 64-bit floats. A JSON sidecar with run metadata is written
// next to it by the training driver.
void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

}  // namespace qcep

#endif  // QCEP_NEURAL_HPP_
