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

#include "qcep/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "qcep/error.hpp"
#include "qcep/parallel.hpp"
#include "qcep/rng.hpp"

namespace qcep {

namespace fs = std::filesystem;
using nlohmann::json;

void SplitPlan::assert_disjoint() const {
  std::unordered_set<std::uint64_t> seen;
  for (const auto* ids : {&train_gm_ids, &val_gm_ids, &test_gm_ids}) {
    for (std::uint64_t id : *ids) {
      if (!seen.insert(id).second) {
        throw DataError("split plan: GM id " + std::to_string(id) +
                        " appears in more than one split");
      }
    }
  }
}

SplitPlan split_by_ground_motion(const std::vector<std::uint64_t>& gm_ids,
                                 std::uint64_t seed, double train_pool_ratio,
                                 double val_fraction) {
  std::vector<std::uint64_t> ids(gm_ids);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 3) {
    throw DataError("split: need at least 3 distinct GM ids, got " +
                    std::to_string(ids.size()));
  }

  Rng rng(seed);
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  const auto n_pool = static_cast<std::size_t>(
      std::floor(train_pool_ratio * static_cast<double>(n)));
  const std::size_t n_test = n - n_pool;
  const auto n_val = static_cast<std::size_t>(
      std::floor(val_fraction * static_cast<double>(n_pool)));
  const std::size_t n_train = n_pool - n_val;
  if (n_test == 0 || n_val == 0 || n_train == 0) {
    throw DataError("split: too few GMs to populate train/val/test (" +
                    std::to_string(n) + " ids)");
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.train_gm_ids.assign(ids.begin(), ids.begin() + n_train);
  plan.val_gm_ids.assign(ids.begin() + n_train, ids.begin() + n_pool);
  plan.test_gm_ids.assign(ids.begin() + n_pool, ids.end());
  std::sort(plan.train_gm_ids.begin(), plan.train_gm_ids.end());
  std::sort(plan.val_gm_ids.begin(), plan.val_gm_ids.end());
  std::sort(plan.test_gm_ids.begin(), plan.test_gm_ids.end());
  plan.assert_disjoint();
  return plan;
}

NetworkConfig TrainConfig::network_config() const {
  NetworkConfig net;
  if (feature_kind == FeatureKind::kIntensity) {
    net.input_dim = 40;
    net.gru_units.clear();
  } else {
    net.input_dim = 16;
    net.gru_units = {50, 60, 70, 80, 90, 100};
  }
  net.dense_units = {2000, 2000};
  net.dropout_rate = 0.05;
  return net;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw DataError("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw DataError("train config: lr must be > 0");
  if (patience < 1) throw DataError("train config: patience must be >= 1");
  if (max_epochs < 1) throw DataError("train config: max_epochs must be >= 1");
  if (chunk_size < 1) throw DataError("train config: chunk_size must be >= 1");
}

namespace {

struct Subset {
  std::vector<const FeatureEvent*> events;
  std::vector<double> targets;  // amplified drift = 10 x fraction
};

Subset collect(const FeatureSet& data, const std::vector<std::uint64_t>& gm_ids) {
  const std::unordered_set<std::uint64_t> wanted(gm_ids.begin(), gm_ids.end());
  Subset s;
  for (const FeatureEvent& ev : data.events) {
    if (!wanted.count(ev.gm_id)) continue;
    const double target = 10.0 * ev.drift_ratio;
    if (!(target >= 0.0) || target >= 1.0) {
      throw DataError("event " + ev.event_id + ": drift ratio " +
                      std::to_string(ev.drift_ratio) +
                      " outside the supported [0, 0.1) range");
    }
    s.events.push_back(&ev);
    s.targets.push_back(target);
  }
  return s;
}

Batch subset_batch(const FeatureSet& data, const Subset& sub,
                   const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
  if (data.kind == FeatureKind::kIntensity) {
    std::vector<const std::vector<double>*> rows;
    rows.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      rows.push_back(&sub.events[order[i]]->vec);
    }
    return make_vector_batch(rows);
  }
  std::vector<const FusedTensor*> tensors;
  tensors.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    tensors.push_back(&sub.events[order[i]]->fused);
  }
  return make_fused_batch(tensors);
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

// Eval-mode predictions over a subset, chunked and parallel per chunk.
std::vector<double> predict_subset(const Network& net, const FeatureSet& data,
                                   const Subset& sub, std::size_t chunk_size) {
  const std::size_t n = sub.events.size();
  const auto order = identity_order(n);
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<double> preds(n);
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n, begin + chunk_size);
    const Batch batch = subset_batch(data, sub, order, begin, end);
    const std::vector<double> out = net.forward(batch, RunMode::kEval);
    std::copy(out.begin(), out.end(), preds.begin() + begin);
  });
  return preds;
}

}  // namespace

TrainResult train(const FeatureSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.kind != cfg.feature_kind) {
    throw DataError("train: dataset holds " + feature_kind_name(data.kind) +
                    " features but the config asks for " +
                    feature_kind_name(cfg.feature_kind));
  }

  std::vector<std::uint64_t> gm_ids;
  gm_ids.reserve(data.events.size());
  for (const FeatureEvent& ev : data.events) gm_ids.push_back(ev.gm_id);

  TrainResult result;
  result.split = split_by_ground_motion(gm_ids, cfg.seed, cfg.train_pool_ratio,
                                        cfg.val_fraction);
  result.split.assert_disjoint();

  const Subset train_set = collect(data, result.split.train_gm_ids);
  const Subset val_set = collect(data, result.split.val_gm_ids);
  if (train_set.events.empty() || val_set.events.empty()) {
    throw DataError("train: empty train or validation subset");
  }

  Network net(cfg.network_config());
  {
    Rng init_rng(derive_seed(cfg.seed, 0x1217));
    net.init_params(init_rng);
  }
  NadamState opt_state(net.param_count());
  const NadamConfig opt_cfg{.lr = cfg.lr};

  const std::size_t n_train = train_set.events.size();
  EarlyStopper stopper(cfg.patience);
  std::vector<double> best_params = net.params();
  std::vector<double> grad(net.param_count());

  // Two in-flight gradient buffers per wave keep memory bounded; accumulation
  // always happens in chunk-index order, so the worker count cannot change
  // the result.
  const std::size_t wave = std::max<std::size_t>(1, worker_count());
  std::vector<std::vector<double>> chunk_grads(wave);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs && !result.diverged; ++epoch) {
    std::vector<std::size_t> order = identity_order(n_train);
    Rng shuffle_rng(derive_seed(cfg.seed, 0xe90c0 + epoch));
    shuffle_rng.shuffle(order);

    double train_abs_sum = 0.0;
    try {
      for (std::size_t batch_begin = 0; batch_begin < n_train;
           batch_begin += cfg.batch_size) {
        const std::size_t batch_end = std::min(n_train, batch_begin + cfg.batch_size);
        const std::size_t batch_n = batch_end - batch_begin;
        const std::size_t n_chunks = (batch_n + cfg.chunk_size - 1) / cfg.chunk_size;
        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<double> batch_errs(batch_n);

        for (std::size_t wave_begin = 0; wave_begin < n_chunks; wave_begin += wave) {
          const std::size_t wave_end = std::min(n_chunks, wave_begin + wave);
          parallel_for(wave_end - wave_begin, [&](std::size_t w) {
            const std::size_t c = wave_begin + w;
            const std::size_t begin = batch_begin + c * cfg.chunk_size;
            const std::size_t end = std::min(batch_end, begin + cfg.chunk_size);
            const Batch batch = subset_batch(data, train_set, order, begin, end);
            std::vector<double> targets(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
              targets[i - begin] = train_set.targets[order[i]];
            }
            auto& buf = chunk_grads[w];
            buf.assign(net.param_count(), 0.0);
            ForwardTrace trace;
            Rng dropout_rng(derive_seed(cfg.seed, 0xd401 + epoch * 1000003 +
                                                      batch_begin * 131 + c));
            net.forward(batch, RunMode::kTrain, &dropout_rng, &trace);
            const std::vector<double> errs = net.backward_mae(
                batch, trace, targets, static_cast<double>(batch_n), buf);
            std::copy(errs.begin(), errs.end(),
                      batch_errs.begin() + (begin - batch_begin));
          });
          for (std::size_t w = 0; w < wave_end - wave_begin; ++w) {
            const auto& buf = chunk_grads[w];
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += buf[i];
          }
        }
        nadam_step(net.params(), grad, opt_state, opt_cfg);
        for (double e : batch_errs) train_abs_sum += e;
      }
    } catch (const DivergenceError&) {
      result.diverged = true;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mae = train_abs_sum / static_cast<double>(n_train);
    std::vector<double> val_preds;
    try {
      val_preds = predict_subset(net, data, val_set, cfg.chunk_size);
    } catch (const DivergenceError&) {
      result.diverged = true;
      break;
    }
    stats.val_mae = mae_loss(val_preds, val_set.targets);
    result.history.push_back(stats);

    if (stopper.observe(stats.val_mae)) {
      best_params = net.params();
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }

  if (result.history.empty() && result.diverged) {
    throw DivergenceError("training diverged before completing one epoch");
  }
  net.params() = best_params;
  result.net.emplace(std::move(net));
  return result;
}

EvalReport evaluate(const Network& net, const FeatureSet& data,
                    const SplitPlan& split) {
  const Subset test_set = collect(data, split.test_gm_ids);
  if (test_set.events.empty()) {
    throw DataError("evaluate: test split selects no events");
  }

  const std::vector<double> preds = predict_subset(net, data, test_set, 64);

  EvalReport report;
  report.kind = data.kind;
  report.n_test = test_set.events.size();
  report.scatter.reserve(preds.size());
  std::vector<double> truth_pct(preds.size()), err_pct(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    // amplified units are 10 x drift fraction; percent is 100 x fraction
    const double truth = test_set.targets[i] * 10.0;
    const double err = std::fabs(preds[i] - test_set.targets[i]) * 10.0;
    truth_pct[i] = truth;
    err_pct[i] = err;
    report.scatter.emplace_back(truth, err);
  }
  double sum = 0.0;
  for (double e : err_pct) sum += e;
  report.test_mae_percent = sum / static_cast<double>(err_pct.size());
  report.fit_coeffs = polyfit(truth_pct, err_pct, 3);
  return report;
}

std::vector<double> polyfit(const std::vector<double>& x,
                            const std::vector<double>& y, std::size_t degree) {
  if (x.size() != y.size() || x.empty()) {
    throw DataError("polyfit: mismatched or empty inputs");
  }
  const std::size_t m = degree + 1;
  std::vector<double> ata(m * m, 0.0);
  std::vector<double> aty(m, 0.0);
  std::vector<double> powers(2 * degree + 1);
  for (std::size_t s = 0; s < x.size(); ++s) {
    powers[0] = 1.0;
    for (std::size_t p = 1; p < powers.size(); ++p) powers[p] = powers[p - 1] * x[s];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) ata[i * m + j] += powers[i + j];
      aty[i] += powers[i] * y[s];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::fabs(ata[r * m + col]) > std::fabs(ata[pivot * m + col])) pivot = r;
    }
    if (ata[pivot * m + col] == 0.0) {
      throw DataError("polyfit: singular normal equations");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < m; ++j) std::swap(ata[col * m + j], ata[pivot * m + j]);
      std::swap(aty[col], aty[pivot]);
    }
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const double factor = ata[r * m + col] / ata[col * m + col];
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < m; ++j) ata[r * m + j] -= factor * ata[col * m + j];
      aty[r] -= factor * aty[col];
    }
  }
  std::vector<double> coeffs(m);
  for (std::size_t i = 0; i < m; ++i) coeffs[i] = aty[i] / ata[i * m + i];
  return coeffs;
}

void write_history_csv(const std::string& path,
                       const std::vector<EpochStats>& history) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write '" + path + "'");
  std::fputs("epoch,train_mae,val_mae\n", f);
  for (const EpochStats& s : history) {
    std::fprintf(f, "%zu,%.17g,%.17g\n", s.epoch, s.train_mae, s.val_mae);
  }
  std::fclose(f);
}

void write_scatter_csv(const std::string& path, const EvalReport& report) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write '" + path + "'");
  std::fputs("truth_drift_percent,abs_error_percent\n", f);
  for (const auto& [truth, err] : report.scatter) {
    std::fprintf(f, "%.17g,%.17g\n", truth, err);
  }
  std::fclose(f);
}

namespace {

double poly_eval(const std::vector<double>& coeffs, double x) {
  double acc = 0.0;
  for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
  return acc;
}

}  // namespace

void write_scatter_svg(const std::string& path, const EvalReport& report) {
  const double width = 640, height = 480;
  const double ml = 60, mr = 20, mt = 40, mb = 50;
  double x_max = 0.0, y_max = 0.0;
  for (const auto& [t, e] : report.scatter) {
    x_max = std::max(x_max, t);
    y_max = std::max(y_max, e);
  }
  x_max = std::max(x_max * 1.05, 1e-6);
  y_max = std::max(y_max * 1.05, 1e-6);
  const auto px = [&](double x) { return ml + x / x_max * (width - ml - mr); };
  const auto py = [&](double y) { return height - mb - y / y_max * (height - mt - mb); };

  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write '" + path + "'");
  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
               "viewBox=\"0 0 %g %g\">\n",
               width, height, width, height);
  std::fprintf(f, "<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", width, height);
  std::fprintf(f,
               "<text x=\"%g\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
               "text-anchor=\"middle\">%s features: absolute error vs drift</text>\n",
               width / 2, feature_kind_name(report.kind).c_str());
  // axes
  std::fprintf(f, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
               ml, height - mb, width - mr, height - mb);
  std::fprintf(f, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
               ml, mt, ml, height - mb);
  for (int i = 0; i <= 5; ++i) {
    const double tx = x_max * i / 5.0;
    const double ty = y_max * i / 5.0;
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
                 "text-anchor=\"middle\">%.2f</text>\n",
                 px(tx), height - mb + 16, tx);
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" "
                 "text-anchor=\"end\">%.3f</text>\n",
                 ml - 6, py(ty) + 4, ty);
  }
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"13\" "
               "text-anchor=\"middle\">true drift ratio (%%)</text>\n",
               (ml + width - mr) / 2, height - 12);
  std::fprintf(f,
               "<text x=\"16\" y=\"%g\" font-family=\"sans-serif\" font-size=\"13\" "
               "text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">absolute error "
               "(%%)</text>\n",
               (mt + height - mb) / 2, (mt + height - mb) / 2);
  for (const auto& [t, e] : report.scatter) {
    std::fprintf(f,
                 "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"steelblue\" "
                 "fill-opacity=\"0.55\"/>\n",
                 px(t), py(e));
  }
  // polynomial fit curve
  std::fputs("<polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"",
             f);
  for (int i = 0; i <= 100; ++i) {
    const double x = x_max * i / 100.0;
    const double y = std::clamp(poly_eval(report.fit_coeffs, x), 0.0, y_max);
    std::fprintf(f, "%.2f,%.2f ", px(x), py(y));
  }
  std::fputs("\"/>\n</svg>\n", f);
  std::fclose(f);
}

void write_train_outputs(const std::string& out_dir, const TrainResult& result,
                         const TrainConfig& cfg) {
  fs::create_directories(out_dir);
  save_network((fs::path(out_dir) / "checkpoint.qnn1").string(), *result.net);
  write_history_csv((fs::path(out_dir) / "history.csv").string(), result.history);

  json history = json::array();
  for (const EpochStats& s : result.history) {
    history.push_back({{"epoch", s.epoch},
                       {"train_mae", s.train_mae},
                       {"val_mae", s.val_mae}});
  }
  json sidecar{{"feature_kind", feature_kind_name(cfg.feature_kind)},
               {"seed", cfg.seed},
               {"batch_size", cfg.batch_size},
               {"lr", cfg.lr},
               {"patience", cfg.patience},
               {"max_epochs", cfg.max_epochs},
               {"chunk_size", cfg.chunk_size},
               {"train_pool_ratio", cfg.train_pool_ratio},
               {"val_fraction", cfg.val_fraction},
               {"best_epoch", result.best_epoch},
               {"diverged", result.diverged},
               {"param_count", result.net->param_count()},
               {"epochs", std::move(history)},
               {"split",
                {{"train_gm_ids", result.split.train_gm_ids},
                 {"val_gm_ids", result.split.val_gm_ids},
                 {"test_gm_ids", result.split.test_gm_ids}}}};
  std::ofstream out(fs::path(out_dir) / "checkpoint.json", std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint sidecar");
  out << sidecar.dump(2) << '\n';
}

void write_eval_outputs(const std::string& out_dir, const EvalReport& report) {
  fs::create_directories(out_dir);
  const std::string kind = feature_kind_name(report.kind);
  write_scatter_csv((fs::path(out_dir) / ("scatter_" + kind + ".csv")).string(),
                    report);
  write_scatter_svg((fs::path(out_dir) / ("scatter_" + kind + ".svg")).string(),
                    report);
  json j{{"kind", kind},
         {"test_mae_percent", report.test_mae_percent},
         {"n_test", report.n_test},
         {"fit_coeffs", report.fit_coeffs},
         {"scatter_csv", "scatter_" + kind + ".csv"},
         {"scatter_svg", "scatter_" + kind + ".svg"}};
  std::ofstream out(fs::path(out_dir) / ("eval_" + kind + ".json"), std::ios::trunc);
  if (!out) throw DataError("cannot write eval report");
  out << j.dump(2) << '\n';
}

}  // namespace qcep
