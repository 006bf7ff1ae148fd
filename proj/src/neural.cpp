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

#include "qcep/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "qcep/error.hpp"

namespace qcep {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scratch for a row-major transpose of a weight matrix. The forward pass
// works on transposed kernels so its inner loops stream contiguously over
// the output dimension, which vectorizes without reassociating any sum.
std::vector<double> transpose(const double* w, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = w[r * cols + c];
  }
  return out;
}

// C (m x n) = A (m x k) . B (k x n), optionally accumulating.
void gemm_ab(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      const double coef = ai[l];
      const double* bl = b + l * ldb;
      for (std::size_t j = 0; j < n; ++j) ci[j] += coef * bl[j];
    }
  }
}

// C (m x n) += A (k x m)^T . B (k x n). The k (batch) loop is outermost and
// sequential, so accumulation order is fixed.
void gemm_atb_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) {
  for (std::size_t l = 0; l < k; ++l) {
    const double* al = a + l * lda;
    const double* bl = b + l * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const double coef = al[i];
      if (coef == 0.0) continue;
      double* ci = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) ci[j] += coef * bl[j];
    }
  }
}

void add_bias_rows(double* mat, std::size_t rows, std::size_t cols,
                   const double* bias) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = mat + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
  }
}

// Square orthogonal matrix via re-orthogonalized modified Gram-Schmidt on a
// Gaussian sample; written row-major into out.
void orthogonal_fill(double* out, std::size_t n, Rng& rng) {
  std::vector<double> a(n * n);
  for (double& v : a) v = rng.normal();
  // q holds columns; a is column j at stride n
  std::vector<double> q(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a[i * n + j];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q[i * n + p] * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= dot * q[i * n + p];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q[i * n + j] = v[i] / norm;
  }
  std::copy(q.begin(), q.end(), out);
}

void glorot_fill(double* out, std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  const std::size_t n = fan_in * fan_out;
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.uniform(-limit, limit);
}

}  // namespace

Batch make_fused_batch(std::span<const FusedTensor* const> events) {
  Batch out;
  out.batch = events.size();
  out.features = 16;
  out.lengths.reserve(events.size());
  for (const FusedTensor* t : events) {
    if (t->n_cols != 16) throw DataError("make_fused_batch: expected 16 columns");
    out.lengths.push_back(t->n_w);
    out.t_max = std::max(out.t_max, t->n_w);
  }
  out.data.assign(out.t_max * out.batch * out.features, 0.0);
  for (std::size_t b = 0; b < out.batch; ++b) {
    const FusedTensor& t = *events[b];
    for (std::size_t step = 0; step < t.n_w; ++step) {
      std::memcpy(&out.data[(step * out.batch + b) * out.features],
                  &t.values[step * t.n_cols], out.features * sizeof(double));
    }
  }
  return out;
}

Batch make_vector_batch(std::span<const std::vector<double>* const> rows) {
  Batch out;
  out.batch = rows.size();
  out.t_max = 1;
  out.features = rows.empty() ? 0 : rows.front()->size();
  out.lengths.assign(out.batch, 1);
  out.data.resize(out.batch * out.features);
  for (std::size_t b = 0; b < out.batch; ++b) {
    if (rows[b]->size() != out.features) {
      throw DataError("make_vector_batch: inconsistent feature widths");
    }
    std::memcpy(&out.data[b * out.features], rows[b]->data(),
                out.features * sizeof(double));
  }
  return out;
}

void gru_cell(const GruParamView& p, std::span<const double> x,
              std::span<const double> h_prev, std::span<double> h_out) {
  if (x.size() != p.input_dim || h_prev.size() != p.units ||
      h_out.size() != p.units) {
    throw DataError("gru_cell: shape mismatch");
  }
  const std::size_t u = p.units;
  std::vector<double> z(u), r(u), c(u);
  auto gate = [&](std::span<const double> w, std::span<const double> uu,
                  std::span<const double> b, std::size_t i) {
    double acc = b[i];
    const double* wi = w.data() + i * p.input_dim;
    for (std::size_t j = 0; j < p.input_dim; ++j) acc += wi[j] * x[j];
    const double* ui = uu.data() + i * u;
    for (std::size_t j = 0; j < u; ++j) acc += ui[j] * h_prev[j];
    return acc;
  };
  for (std::size_t i = 0; i < u; ++i) z[i] = sigmoid(gate(p.w_z, p.u_z, p.b_z, i));
  for (std::size_t i = 0; i < u; ++i) r[i] = sigmoid(gate(p.w_r, p.u_r, p.b_r, i));
  for (std::size_t i = 0; i < u; ++i) {
    double acc = p.b_h[i];
    const double* wi = p.w_h.data() + i * p.input_dim;
    for (std::size_t j = 0; j < p.input_dim; ++j) acc += wi[j] * x[j];
    const double* ui = p.u_h.data() + i * u;
    for (std::size_t j = 0; j < u; ++j) acc += ui[j] * (r[j] * h_prev[j]);
    c[i] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t i = 0; i < u; ++i) {
    h_out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * c[i];
  }
}

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.input_dim == 0) throw DataError("network: input_dim must be > 0");
  if (!(cfg_.dropout_rate >= 0.0 && cfg_.dropout_rate < 1.0)) {
    throw DataError("network: dropout rate must lie in [0, 1)");
  }

  std::size_t offset = 0;
  auto reserve = [&offset](std::size_t rows, std::size_t cols) {
    View v{offset, rows, cols};
    offset += rows * cols;
    return v;
  };

  std::size_t in = cfg_.input_dim;
  for (std::size_t units : cfg_.gru_units) {
    if (units == 0) throw DataError("network: zero-width GRU layer");
    GruViews g;
    g.units = units;
    g.in = in;
    for (int k = 0; k < 3; ++k) g.w[k] = reserve(units, in);
    for (int k = 0; k < 3; ++k) g.u[k] = reserve(units, units);
    for (int k = 0; k < 3; ++k) g.b[k] = reserve(units, 1);
    gru_views_.push_back(g);
    in = units;
  }
  for (std::size_t units : cfg_.dense_units) {
    if (units == 0) throw DataError("network: zero-width dense layer");
    DenseViews d;
    d.w = reserve(units, in);
    d.b = reserve(units, 1);
    dense_views_.push_back(d);
    in = units;
  }
  head_views_.w = reserve(1, in);
  head_views_.b = reserve(1, 1);

  theta_.assign(offset, 0.0);
}

std::size_t Network::bottleneck_input_dim() const {
  return cfg_.gru_units.empty() ? cfg_.input_dim : cfg_.gru_units.back();
}

void Network::init_params(Rng& rng) {
  for (const GruViews& g : gru_views_) {
    for (int k = 0; k < 3; ++k) glorot_fill(at(g.w[k]), g.units, g.in, rng);
    for (int k = 0; k < 3; ++k) orthogonal_fill(at(g.u[k]), g.units, rng);
    for (int k = 0; k < 3; ++k) std::fill_n(at(g.b[k]), g.units, 0.0);
  }
  for (const DenseViews& d : dense_views_) {
    glorot_fill(at(d.w), d.w.rows, d.w.cols, rng);
    std::fill_n(at(d.b), d.b.rows, 0.0);
  }
  glorot_fill(at(head_views_.w), 1, head_views_.w.cols, rng);
  *at(head_views_.b) = 0.0;
}

GruParamView Network::gru_view(std::size_t layer) const {
  const GruViews& g = gru_views_.at(layer);
  auto span_of = [this](const View& v) {
    return std::span<const double>(theta_.data() + v.offset, v.size());
  };
  GruParamView p;
  p.w_z = span_of(g.w[0]);
  p.w_r = span_of(g.w[1]);
  p.w_h = span_of(g.w[2]);
  p.u_z = span_of(g.u[0]);
  p.u_r = span_of(g.u[1]);
  p.u_h = span_of(g.u[2]);
  p.b_z = span_of(g.b[0]);
  p.b_r = span_of(g.b[1]);
  p.b_h = span_of(g.b[2]);
  p.units = g.units;
  p.input_dim = g.in;
  return p;
}

std::vector<double> Network::forward(const Batch& batch, RunMode mode,
                                     Rng* dropout_rng,
                                     ForwardTrace* trace) const {
  const std::size_t n_batch = batch.batch;
  const std::size_t t_max = batch.t_max;
  if (n_batch == 0) throw DataError("forward: empty batch");
  if (batch.features != cfg_.input_dim) {
    throw DataError("forward: batch has " + std::to_string(batch.features) +
                    " features, network expects " + std::to_string(cfg_.input_dim));
  }
  for (std::size_t len : batch.lengths) {
    if (len == 0) throw DataError("forward: sample with no valid frames");
    if (len > t_max) throw DataError("forward: length exceeds batch extent");
  }
  const bool use_dropout = cfg_.dropout_rate > 0.0 && !cfg_.dense_units.empty();
  if (mode == RunMode::kTrain && use_dropout && dropout_rng == nullptr) {
    throw DataError("forward: train mode requires an RNG for dropout");
  }

  const std::size_t n_gru = cfg_.gru_units.size();
  if (n_gru == 0 && t_max != 1) {
    throw DataError("forward: bottleneck-only network expects one row per sample");
  }

  if (trace) {
    trace->mode = mode;
    trace->gru.assign(n_gru, {});
    trace->dense_act.assign(cfg_.dense_units.size(), {});
    trace->dropout_mask.clear();
  }

  // Temporal part: time-major scan with per-sample masking. A sample's state
  // stops updating at its last valid step, so the final state is the state at
  // that step no matter how much padding follows.
  std::vector<double> bottleneck_in;
  if (n_gru == 0) {
    bottleneck_in = batch.data;
  } else {
    // Per-layer transposed kernels, built once per call and reused each step.
    std::vector<std::vector<double>> wt(3 * n_gru), ut(3 * n_gru);
    for (std::size_t l = 0; l < n_gru; ++l) {
      const GruViews& g = gru_views_[l];
      for (int k = 0; k < 3; ++k) {
        wt[3 * l + k] = transpose(at(g.w[k]), g.units, g.in);
        ut[3 * l + k] = transpose(at(g.u[k]), g.units, g.units);
      }
    }

    std::vector<std::vector<double>> state(n_gru);
    std::vector<std::vector<double>> hnew(n_gru);
    for (std::size_t l = 0; l < n_gru; ++l) {
      state[l].assign(n_batch * cfg_.gru_units[l], 0.0);
      hnew[l].resize(n_batch * cfg_.gru_units[l]);
      if (trace) {
        const std::size_t cells = t_max * n_batch * cfg_.gru_units[l];
        trace->gru[l].z.assign(cells, 0.0);
        trace->gru[l].r.assign(cells, 0.0);
        trace->gru[l].c.assign(cells, 0.0);
        trace->gru[l].h.assign(cells, 0.0);
      }
    }
    const std::size_t max_units =
        *std::max_element(cfg_.gru_units.begin(), cfg_.gru_units.end());
    std::vector<double> zbuf(n_batch * max_units), rbuf(n_batch * max_units),
        cbuf(n_batch * max_units), rh(n_batch * max_units);

    for (std::size_t t = 0; t < t_max; ++t) {
      const double* x = batch.step(t);
      std::size_t x_dim = cfg_.input_dim;
      for (std::size_t l = 0; l < n_gru; ++l) {
        const GruViews& g = gru_views_[l];
        const std::size_t u = g.units;
        double* z = zbuf.data();
        double* r = rbuf.data();
        double* c = cbuf.data();
        double* h = state[l].data();

        gemm_ab(n_batch, u, x_dim, x, x_dim, wt[3 * l].data(), u, z, u, false);
        gemm_ab(n_batch, u, u, h, u, ut[3 * l].data(), u, z, u, true);
        add_bias_rows(z, n_batch, u, at(g.b[0]));
        gemm_ab(n_batch, u, x_dim, x, x_dim, wt[3 * l + 1].data(), u, r, u, false);
        gemm_ab(n_batch, u, u, h, u, ut[3 * l + 1].data(), u, r, u, true);
        add_bias_rows(r, n_batch, u, at(g.b[1]));
        for (std::size_t i = 0; i < n_batch * u; ++i) {
          z[i] = sigmoid(z[i]);
          r[i] = sigmoid(r[i]);
          rh.data()[i] = r[i] * h[i];
        }
        gemm_ab(n_batch, u, x_dim, x, x_dim, wt[3 * l + 2].data(), u, c, u, false);
        gemm_ab(n_batch, u, u, rh.data(), u, ut[3 * l + 2].data(), u, c, u, true);
        add_bias_rows(c, n_batch, u, at(g.b[2]));

        double* out = hnew[l].data();
        for (std::size_t i = 0; i < n_batch * u; ++i) {
          const double cand = c[i] > 0.0 ? c[i] : 0.0;
          c[i] = cand;
          out[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
        }

        for (std::size_t b = 0; b < n_batch; ++b) {
          if (t >= batch.lengths[b]) continue;
          double* hb = h + b * u;
          const double* ob = out + b * u;
          for (std::size_t i = 0; i < u; ++i) {
            if (!std::isfinite(ob[i])) {
              throw DivergenceError("non-finite state in gru layer " +
                                    std::to_string(l) + " at step " +
                                    std::to_string(t));
            }
            hb[i] = ob[i];
          }
          if (trace) {
            const std::size_t cell = (t * n_batch + b) * u;
            std::memcpy(&trace->gru[l].z[cell], z + b * u, u * sizeof(double));
            std::memcpy(&trace->gru[l].r[cell], r + b * u, u * sizeof(double));
            std::memcpy(&trace->gru[l].c[cell], c + b * u, u * sizeof(double));
            std::memcpy(&trace->gru[l].h[cell], ob, u * sizeof(double));
          }
        }
        x = out;
        x_dim = u;
      }
    }
    bottleneck_in = std::move(state.back());
  }

  if (trace) trace->bottleneck_in = bottleneck_in;

  // Bottleneck part.
  std::vector<double> act = std::move(bottleneck_in);
  std::size_t act_dim = bottleneck_input_dim();
  for (std::size_t d = 0; d < cfg_.dense_units.size(); ++d) {
    const DenseViews& dv = dense_views_[d];
    const std::size_t u = cfg_.dense_units[d];
    std::vector<double> next(n_batch * u);
    const std::vector<double> wt = transpose(at(dv.w), u, act_dim);
    gemm_ab(n_batch, u, act_dim, act.data(), act_dim, wt.data(), u,
            next.data(), u, false);
    add_bias_rows(next.data(), n_batch, u, at(dv.b));
    for (double& v : next) v = std::tanh(v);
    if (trace) trace->dense_act[d] = next;
    if (d == 0 && use_dropout && mode == RunMode::kTrain) {
      const double keep_scale = 1.0 / (1.0 - cfg_.dropout_rate);
      std::vector<double> mask(n_batch * u);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = dropout_rng->uniform() < cfg_.dropout_rate ? 0.0 : keep_scale;
      }
      for (std::size_t i = 0; i < next.size(); ++i) next[i] *= mask[i];
      if (trace) trace->dropout_mask = std::move(mask);
    }
    act = std::move(next);
    act_dim = u;
  }

  std::vector<double> yhat(n_batch);
  std::vector<double> logits(n_batch);
  const double* w_head = at(head_views_.w);
  const double b_head = *at(head_views_.b);
  for (std::size_t b = 0; b < n_batch; ++b) {
    double acc = b_head;
    const double* row = act.data() + b * act_dim;
    for (std::size_t j = 0; j < act_dim; ++j) acc += w_head[j] * row[j];
    logits[b] = acc;
    yhat[b] = sigmoid(acc);
    if (!std::isfinite(yhat[b])) {
      throw DivergenceError("non-finite network output for sample " +
                            std::to_string(b));
    }
  }
  if (trace) {
    trace->logits = logits;
    trace->yhat = yhat;
  }
  return yhat;
}

double Network::predict(const FusedTensor& input) const {
  const FusedTensor* ptr = &input;
  Batch b = make_fused_batch(std::span<const FusedTensor* const>(&ptr, 1));
  return forward(b, RunMode::kEval).front();
}

double Network::predict_vector(const std::vector<double>& features) const {
  const std::vector<double>* ptr = &features;
  Batch b = make_vector_batch(std::span<const std::vector<double>* const>(&ptr, 1));
  return forward(b, RunMode::kEval).front();
}

std::vector<double> Network::backward_mae(const Batch& batch,
                                          const ForwardTrace& trace,
                                          std::span<const double> targets,
                                          double loss_norm,
                                          std::span<double> grad) const {
  const std::size_t n_batch = batch.batch;
  const std::size_t t_max = batch.t_max;
  if (trace.mode != RunMode::kTrain) {
    throw DataError("backward_mae: trace must come from a train-mode forward");
  }
  if (targets.size() != n_batch || trace.yhat.size() != n_batch) {
    throw DataError("backward_mae: target/trace size mismatch");
  }
  if (grad.size() != theta_.size()) {
    throw DataError("backward_mae: gradient buffer has the wrong size");
  }
  if (!(loss_norm > 0.0)) throw DataError("backward_mae: loss_norm must be > 0");

  const bool use_dropout = cfg_.dropout_rate > 0.0 && !cfg_.dense_units.empty();
  if (use_dropout && trace.dropout_mask.size() != n_batch * cfg_.dense_units[0]) {
    throw DataError("backward_mae: missing dropout mask in trace");
  }

  std::vector<double> abs_err(n_batch);
  std::vector<double> dlogit(n_batch);
  for (std::size_t b = 0; b < n_batch; ++b) {
    const double e = trace.yhat[b] - targets[b];
    abs_err[b] = std::fabs(e);
    const double sign = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
    dlogit[b] = sign / loss_norm * trace.yhat[b] * (1.0 - trace.yhat[b]);
  }

  const std::size_t n_dense = cfg_.dense_units.size();
  const std::size_t bn_in = bottleneck_input_dim();

  // Inputs seen by each dense layer (dropout applied on layer 0's output).
  auto dense_input = [&](std::size_t d) -> std::vector<double> {
    if (d == 0) return trace.bottleneck_in;
    std::vector<double> in = trace.dense_act[d - 1];
    if (d == 1 && use_dropout) {
      for (std::size_t i = 0; i < in.size(); ++i) in[i] *= trace.dropout_mask[i];
    }
    return in;
  };

  const std::size_t head_in_dim = n_dense == 0 ? bn_in : cfg_.dense_units.back();
  std::vector<double> head_in = dense_input(n_dense);

  // Head.
  double* g_head_w = grad.data() + head_views_.w.offset;
  double* g_head_b = grad.data() + head_views_.b.offset;
  for (std::size_t b = 0; b < n_batch; ++b) {
    const double coef = dlogit[b];
    if (coef != 0.0) {
      const double* row = head_in.data() + b * head_in_dim;
      for (std::size_t j = 0; j < head_in_dim; ++j) g_head_w[j] += coef * row[j];
      *g_head_b += coef;
    }
  }
  std::vector<double> da(n_batch * head_in_dim);
  const double* w_head = at(head_views_.w);
  for (std::size_t b = 0; b < n_batch; ++b) {
    double* row = da.data() + b * head_in_dim;
    for (std::size_t j = 0; j < head_in_dim; ++j) row[j] = dlogit[b] * w_head[j];
  }

  // Dense layers, top-down. da arrives w.r.t. the value each layer fed
  // forward (post-dropout for layer 0).
  for (std::size_t d = n_dense; d-- > 0;) {
    const DenseViews& dv = dense_views_[d];
    const std::size_t u = cfg_.dense_units[d];
    const std::size_t in_dim = d == 0 ? bn_in : cfg_.dense_units[d - 1];
    const std::vector<double>& act = trace.dense_act[d];

    std::vector<double> dpre(n_batch * u);
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      double g = da[i];
      if (d == 0 && use_dropout) g *= trace.dropout_mask[i];
      dpre[i] = g * (1.0 - act[i] * act[i]);
    }

    std::vector<double> x = dense_input(d);
    gemm_atb_acc(u, in_dim, n_batch, dpre.data(), u, x.data(), in_dim,
                 grad.data() + dv.w.offset, in_dim);
    double* gb = grad.data() + dv.b.offset;
    for (std::size_t b = 0; b < n_batch; ++b) {
      const double* row = dpre.data() + b * u;
      for (std::size_t j = 0; j < u; ++j) gb[j] += row[j];
    }

    std::vector<double> da_next(n_batch * in_dim);
    gemm_ab(n_batch, in_dim, u, dpre.data(), u, at(dv.w), in_dim, da_next.data(),
            in_dim, false);
    da = std::move(da_next);
  }

  const std::size_t n_gru = cfg_.gru_units.size();
  if (n_gru == 0) return abs_err;

  // GRU layers, top-down; each layer consumes per-step output gradients from
  // the layer above (none for the top layer, whose final state feeds the
  // bottleneck) and produces per-step input gradients for the layer below.
  std::vector<double> d_state = std::move(da);  // batch x units of top layer
  std::vector<double> d_out_seq;                // batch-major per step, layer above
  std::vector<double> d_in_seq;

  const std::size_t max_units =
      *std::max_element(cfg_.gru_units.begin(), cfg_.gru_units.end());
  std::vector<double> dh_eff(n_batch * max_units), dz(n_batch * max_units),
      ds_c(n_batch * max_units), ds_z(n_batch * max_units),
      ds_r(n_batch * max_units), d_rh(n_batch * max_units),
      dhp(n_batch * max_units), rh(n_batch * max_units),
      h_prev(n_batch * max_units);

  for (std::size_t l = n_gru; l-- > 0;) {
    const GruViews& g = gru_views_[l];
    const std::size_t u = g.units;
    const std::size_t in_dim = g.in;
    const ForwardTrace::GruTrace& tr = trace.gru[l];
    const bool top = (l + 1 == n_gru);

    d_in_seq.assign(t_max * n_batch * in_dim, 0.0);

    for (std::size_t t = t_max; t-- > 0;) {
      // Effective output gradient at this step; zero rows for samples whose
      // sequence has already ended (their state gradient passes through).
      bool any_active = false;
      for (std::size_t b = 0; b < n_batch; ++b) {
        double* row = dh_eff.data() + b * u;
        if (t >= batch.lengths[b]) {
          std::fill(row, row + u, 0.0);
          continue;
        }
        any_active = true;
        const double* ds = d_state.data() + b * u;
        std::copy(ds, ds + u, row);
        if (!top) {
          const double* up = d_out_seq.data() + (t * n_batch + b) * u;
          for (std::size_t i = 0; i < u; ++i) row[i] += up[i];
        }
      }
      if (!any_active) continue;

      const double* z = &tr.z[t * n_batch * u];
      const double* r = &tr.r[t * n_batch * u];
      const double* c = &tr.c[t * n_batch * u];
      for (std::size_t b = 0; b < n_batch; ++b) {
        double* hp = h_prev.data() + b * u;
        if (t == 0 || t > batch.lengths[b]) {
          std::fill(hp, hp + u, 0.0);
        } else {
          std::memcpy(hp, &tr.h[((t - 1) * n_batch + b) * u], u * sizeof(double));
        }
      }

      for (std::size_t i = 0; i < n_batch * u; ++i) {
        const double dh = dh_eff[i];
        dz[i] = dh * (c[i] - h_prev[i]);
        const double dc = dh * z[i];
        ds_c[i] = c[i] > 0.0 ? dc : 0.0;
        dhp[i] = dh * (1.0 - z[i]);
        rh[i] = r[i] * h_prev[i];
      }
      // d(r.h_prev) = ds_c . U_h
      gemm_ab(n_batch, u, u, ds_c.data(), u, at(g.u[2]), u, d_rh.data(), u, false);
      for (std::size_t i = 0; i < n_batch * u; ++i) {
        const double dr = d_rh[i] * h_prev[i];
        dhp[i] += d_rh[i] * r[i];
        ds_z[i] = dz[i] * z[i] * (1.0 - z[i]);
        ds_r[i] = dr * r[i] * (1.0 - r[i]);
      }

      const double* x = l == 0 ? batch.step(t) : &trace.gru[l - 1].h[t * n_batch * in_dim];

      gemm_atb_acc(u, in_dim, n_batch, ds_z.data(), u, x, in_dim,
                   grad.data() + g.w[0].offset, in_dim);
      gemm_atb_acc(u, in_dim, n_batch, ds_r.data(), u, x, in_dim,
                   grad.data() + g.w[1].offset, in_dim);
      gemm_atb_acc(u, in_dim, n_batch, ds_c.data(), u, x, in_dim,
                   grad.data() + g.w[2].offset, in_dim);
      gemm_atb_acc(u, u, n_batch, ds_z.data(), u, h_prev.data(), u,
                   grad.data() + g.u[0].offset, u);
      gemm_atb_acc(u, u, n_batch, ds_r.data(), u, h_prev.data(), u,
                   grad.data() + g.u[1].offset, u);
      gemm_atb_acc(u, u, n_batch, ds_c.data(), u, rh.data(), u,
                   grad.data() + g.u[2].offset, u);
      double* gb_z = grad.data() + g.b[0].offset;
      double* gb_r = grad.data() + g.b[1].offset;
      double* gb_h = grad.data() + g.b[2].offset;
      for (std::size_t b = 0; b < n_batch; ++b) {
        for (std::size_t i = 0; i < u; ++i) {
          gb_z[i] += ds_z[b * u + i];
          gb_r[i] += ds_r[b * u + i];
          gb_h[i] += ds_c[b * u + i];
        }
      }

      // Input gradient for the layer below.
      double* dx = &d_in_seq[t * n_batch * in_dim];
      gemm_ab(n_batch, in_dim, u, ds_z.data(), u, at(g.w[0]), in_dim, dx, in_dim, false);
      gemm_ab(n_batch, in_dim, u, ds_r.data(), u, at(g.w[1]), in_dim, dx, in_dim, true);
      gemm_ab(n_batch, in_dim, u, ds_c.data(), u, at(g.w[2]), in_dim, dx, in_dim, true);

      // State gradient carried to step t-1.
      gemm_ab(n_batch, u, u, ds_z.data(), u, at(g.u[0]), u, dh_eff.data(), u, false);
      gemm_ab(n_batch, u, u, ds_r.data(), u, at(g.u[1]), u, dh_eff.data(), u, true);
      for (std::size_t b = 0; b < n_batch; ++b) {
        if (t >= batch.lengths[b]) continue;
        double* dst = d_state.data() + b * u;
        for (std::size_t i = 0; i < u; ++i) {
          dst[i] = dhp[b * u + i] + dh_eff[b * u + i];
        }
      }
    }

    if (l > 0) {
      d_out_seq = std::move(d_in_seq);
      d_state.assign(n_batch * cfg_.gru_units[l - 1], 0.0);
    }
  }
  return abs_err;
}

double mae_loss(double y_hat, double y) { return std::fabs(y_hat - y); }

double mae_loss(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size() || y_hat.empty()) {
    throw DataError("mae_loss: size mismatch or empty batch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y_hat.size(); ++i) acc += std::fabs(y_hat[i] - y[i]);
  return acc / static_cast<double>(y_hat.size());
}

void nadam_step(std::span<double> theta, std::span<const double> grad,
                NadamState& state, const NadamConfig& cfg) {
  if (theta.size() != grad.size() || theta.size() != state.m.size()) {
    throw DataError("nadam_step: size mismatch");
  }
  const long long t = state.step + 1;
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  const double b1_t = std::pow(b1, static_cast<double>(t));
  const double b1_t1 = std::pow(b1, static_cast<double>(t + 1));
  const double b2_t = std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double m = state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = m / (1.0 - b1_t1);
    const double v_hat = v / (1.0 - b2_t);
    const double step = cfg.lr * (b1 * m_hat + (1.0 - b1) * g / (1.0 - b1_t)) /
                        (std::sqrt(v_hat) + cfg.eps);
    theta[i] -= step;
    if (!std::isfinite(theta[i])) {
      throw DivergenceError("nadam_step: non-finite parameter at index " +
                            std::to_string(i));
    }
  }
  state.step = t;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "QNN1 writer assumes a little-endian host");

constexpr char kNetMagic[4] = {'Q', 'N', 'N', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError(path + ": truncated QNN1 header");
  }
  return v;
}

}  // namespace

void save_network(const std::string& path, const Network& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  const NetworkConfig& cfg = net.config();
  out.write(kNetMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(cfg.input_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg.gru_units.size()));
  for (std::size_t u : cfg.gru_units) put_u32(out, static_cast<std::uint32_t>(u));
  put_u32(out, static_cast<std::uint32_t>(cfg.dense_units.size()));
  for (std::size_t u : cfg.dense_units) put_u32(out, static_cast<std::uint32_t>(u));
  out.write(reinterpret_cast<const char*>(&cfg.dropout_rate), sizeof(double));
  const std::uint64_t count = net.param_count();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw DataError("write failed for '" + path + "'");
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kNetMagic, 4) != 0) {
    throw DataError(path + ": not a QNN1 checkpoint");
  }
  NetworkConfig cfg;
  cfg.input_dim = get_u32(in, path);
  cfg.gru_units.resize(get_u32(in, path));
  for (std::size_t& u : cfg.gru_units) u = get_u32(in, path);
  cfg.dense_units.resize(get_u32(in, path));
  for (std::size_t& u : cfg.dense_units) u = get_u32(in, path);
  if (!in.read(reinterpret_cast<char*>(&cfg.dropout_rate), sizeof(double))) {
    throw DataError(path + ": truncated QNN1 header");
  }
  std::uint64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) {
    throw DataError(path + ": truncated QNN1 header");
  }
  Network net(cfg);
  if (count != net.param_count()) {
    throw DataError(path + ": parameter count does not match the layer spec");
  }
  if (!in.read(reinterpret_cast<char*>(net.params().data()),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    throw DataError(path + ": truncated QNN1 payload");
  }
  return net;
}

}  // namespace qcep
