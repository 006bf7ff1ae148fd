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

// Command-line driver: synthesize a dataset, extract features, train the
// drift regressor per feature kind, evaluate, and aggregate the comparison
// report. Every run writes a run_config.json sidecar with the resolved
// configuration so any artifact can be regenerated exactly.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcep/dataset.hpp"
#include "qcep/error.hpp"
#include "qcep/parallel.hpp"
#include "qcep/synth.hpp"
#include "qcep/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qcep;

namespace {

// Flat dotted-key JSON config; flag values take precedence over file values,
// which take precedence over built-in defaults. Every key that gets resolved
// is recorded for the run_config.json sidecar.
class ConfigMap {
 public:
  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    try {
      in >> values_;
    } catch (const json::parse_error& e) {
      throw UsageError(path + ": " + e.what());
    }
    if (!values_.is_object()) {
      throw UsageError(path + ": config must be a JSON object with dotted keys");
    }
  }

  template <typename T>
  T get(const std::string& key, T def) {
    T out = def;
    if (values_.contains(key)) {
      try {
        out = values_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw UsageError("config key '" + key + "': " + e.what());
      }
    }
    resolved_[key] = out;
    return out;
  }

  void note(const std::string& key, const json& value) { resolved_[key] = value; }

  const json& resolved() const { return resolved_; }

 private:
  json values_ = json::object();
  json resolved_ = json::object();
};

void write_sidecar(const std::string& out_dir, const std::string& command,
                   const ConfigMap& cfg) {
  fs::create_directories(out_dir);
  json j{{"command", command}, {"config", cfg.resolved()}};
  std::ofstream out(fs::path(out_dir) / "run_config.json", std::ios::trunc);
  if (!out) throw DataError("cannot write run_config.json in '" + out_dir + "'");
  out << j.dump(2) << '\n';
}

SynthDatasetConfig synth_config(ConfigMap& cfg, std::uint64_t seed) {
  SynthDatasetConfig s;
  s.seed = seed;
  s.gm_count = cfg.get<std::size_t>("synth.gm_count", 30);
  s.angles_deg = cfg.get<std::vector<double>>("synth.angles_deg",
                                              {0, 60, 90, 120, 150});
  s.scale_factors = cfg.get<std::vector<double>>("synth.scale_factors",
                                                 {0.5, 1.0, 2.0, 4.0});
  s.sr = cfg.get<double>("synth.sr", 100.0);
  s.duration_s = cfg.get<double>("synth.duration_s", 40.0);
  s.base_pga_lo = cfg.get<double>("synth.base_pga_lo", 0.4);
  s.base_pga_hi = cfg.get<double>("synth.base_pga_hi", 2.5);
  s.max_drift = cfg.get<double>("synth.max_drift", 0.10);
  s.noise_std = cfg.get<double>("synth.noise_std", 0.0);
  s.pier.period_x = cfg.get<double>("pier.period_x", 0.8);
  s.pier.period_y = cfg.get<double>("pier.period_y", 1.2);
  s.pier.damping = cfg.get<double>("pier.damping", 0.05);
  s.pier.yield_drift = cfg.get<double>("pier.yield_drift", 0.01);
  s.pier.hardening = cfg.get<double>("pier.hardening", 0.05);
  s.pier.height = cfg.get<double>("pier.height", 8.0);
  return s;
}

int cmd_synth(ConfigMap& cfg, std::uint64_t seed, const std::string& out_dir) {
  const SynthDatasetConfig scfg = synth_config(cfg, seed);
  std::vector<EventSample> events = generate_events(scfg);

  fs::create_directories(fs::path(out_dir) / "records");
  parallel_for(events.size(), [&](std::size_t i) {
    const std::string rel = "records/" + events[i].event_id + ".csv";
    write_multichannel_csv((fs::path(out_dir) / rel).string(), events[i].channels);
  });

  Manifest m;
  m.sr = scfg.sr;
  m.seed = seed;
  for (const EventSample& ev : events) {
    m.events.push_back({ev.event_id, ev.gm_id, ev.angle_deg, ev.scale,
                        ev.drift_ratio, "records/" + ev.event_id + ".csv"});
  }
  write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
  write_sidecar(out_dir, "synth", cfg);
  std::cout << "synth: wrote " << events.size() << " events to " << out_dir << "\n";
  return 0;
}

int cmd_extract(ConfigMap& cfg, const std::string& manifest_path,
                const std::string& feature, const std::string& out_dir) {
  const FeatureKind kind = parse_feature_kind(feature);
  ExtractConfig ecfg;
  ecfg.window_s = cfg.get<double>("extract.window_s", 1.0);
  ecfg.stride_s = cfg.get<double>("extract.stride_s", 0.4);
  ecfg.n_fft = cfg.get<std::size_t>("extract.n_fft", 512);
  ecfg.n_filters = cfg.get<std::size_t>("extract.n_filters", 26);
  ecfg.n_keep = cfg.get<std::size_t>("extract.n_keep", 8);

  const Manifest m = read_manifest(manifest_path);
  const std::string manifest_dir = fs::path(manifest_path).parent_path().string();
  const std::size_t failures = extract_dataset(m, manifest_dir, kind, ecfg, out_dir);
  write_sidecar(out_dir, "extract", cfg);

  const std::size_t done = m.events.size() - failures;
  if (kind == FeatureKind::kIntensity) {
    std::cout << "extract: " << done << " events -> 40-wide intensity vectors\n";
  } else {
    std::cout << "extract: " << done << " events -> fused " << kMaxFrames
              << "x16 tensors (" << feature << ")\n";
  }
  if (failures > 0) {
    std::cerr << "extract: " << failures << " events failed\n";
    return 2;
  }
  return 0;
}

TrainConfig train_config(ConfigMap& cfg, FeatureKind kind, std::uint64_t seed) {
  TrainConfig t;
  t.feature_kind = kind;
  t.seed = seed;
  t.batch_size = cfg.get<std::size_t>("train.batch_size", 1200);
  const double default_lr = kind == FeatureKind::kIntensity ? 1.0e-6 : 2.0e-3;
  t.lr = cfg.get<double>("train.lr", default_lr);
  t.patience = cfg.get<std::size_t>("train.patience", 10);
  t.max_epochs = cfg.get<std::size_t>("train.max_epochs", 40);
  t.chunk_size = cfg.get<std::size_t>("train.chunk_size", 64);
  t.train_pool_ratio = cfg.get<double>("train.pool_ratio", 0.8);
  t.val_fraction = cfg.get<double>("train.val_fraction", 0.1);
  return t;
}

int cmd_train(ConfigMap& cfg, const std::string& features_dir,
              const std::string& feature_flag, std::uint64_t seed,
              const std::string& out_dir) {
  const FeatureSet data =
      load_feature_set((fs::path(features_dir) / "index.json").string());
  if (!feature_flag.empty() && parse_feature_kind(feature_flag) != data.kind) {
    throw DataError("train: --feature " + feature_flag + " does not match the " +
                    feature_kind_name(data.kind) + " features in " + features_dir);
  }
  cfg.note("train.feature_kind", feature_kind_name(data.kind));
  const TrainConfig tcfg = train_config(cfg, data.kind, seed);

  const TrainResult result = train(data, tcfg);
  write_train_outputs(out_dir, result, tcfg);
  write_sidecar(out_dir, "train", cfg);

  std::cout << "train(" << feature_kind_name(data.kind) << "): " <<
      result.history.size() << " epochs, best epoch " << result.best_epoch
            << ", best val MAE " << (result.history.empty()
                                         ? 0.0
                                         : result.history[result.best_epoch].val_mae)
            << " (amplified units)\n";
  if (result.diverged) {
    std::cerr << "train: diverged; checkpoint holds the last good parameters\n";
    return 3;
  }
  return 0;
}

SplitPlan split_from_sidecar(const std::string& checkpoint_dir) {
  const std::string path = (fs::path(checkpoint_dir) / "checkpoint.json").string();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_gm_ids = j.at("split").at("train_gm_ids").get<std::vector<std::uint64_t>>();
    plan.val_gm_ids = j.at("split").at("val_gm_ids").get<std::vector<std::uint64_t>>();
    plan.test_gm_ids = j.at("split").at("test_gm_ids").get<std::vector<std::uint64_t>>();
    return plan;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string checkpoint_kind(const std::string& checkpoint_dir) {
  const std::string path = (fs::path(checkpoint_dir) / "checkpoint.json").string();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
    return j.at("feature_kind").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

int cmd_evaluate(ConfigMap& cfg, const std::string& features_dir,
                 const std::string& checkpoint_dir, const std::string& out_dir) {
  const FeatureSet data =
      load_feature_set((fs::path(features_dir) / "index.json").string());
  const std::string kind = checkpoint_kind(checkpoint_dir);
  if (parse_feature_kind(kind) != data.kind) {
    throw DataError("evaluate: checkpoint was trained on " + kind +
                    " features but '" + features_dir + "' holds " +
                    feature_kind_name(data.kind));
  }
  const Network net =
      load_network((fs::path(checkpoint_dir) / "checkpoint.qnn1").string());
  const SplitPlan split = split_from_sidecar(checkpoint_dir);
  split.assert_disjoint();

  const EvalReport report = evaluate(net, data, split);
  write_eval_outputs(out_dir, report);
  write_sidecar(out_dir, "evaluate", cfg);
  std::cout << "evaluate(" << kind << "): test MAE " << report.test_mae_percent
            << "% over " << report.n_test << " events\n";
  return 0;
}

int cmd_report(ConfigMap& cfg, const std::vector<std::string>& eval_dirs,
               const std::string& out_dir) {
  std::map<std::string, json> by_kind;
  for (const std::string& dir : eval_dirs) {
    bool found = false;
    for (const char* kind : {"mfb", "mfcc", "intensity"}) {
      const fs::path p = fs::path(dir) / ("eval_" + std::string(kind) + ".json");
      if (!fs::exists(p)) continue;
      std::ifstream in(p);
      json j;
      try {
        in >> j;
      } catch (const json::parse_error& e) {
        throw DataError(p.string() + ": " + e.what());
      }
      if (by_kind.count(kind)) {
        throw DataError("report: duplicate evaluation for kind '" +
                        std::string(kind) + "'");
      }
      by_kind[kind] = std::move(j);
      found = true;
    }
    if (!found) throw DataError("report: no eval_<kind>.json found in '" + dir + "'");
  }
  for (const char* kind : {"mfb", "mfcc", "intensity"}) {
    if (!by_kind.count(kind)) {
      throw DataError("report: missing evaluation for kind '" + std::string(kind) +
                      "'");
    }
  }

  json features = json::object();
  for (auto& [kind, j] : by_kind) {
    features[kind] = {{"test_mae_percent", j.at("test_mae_percent")},
                      {"n_test", j.at("n_test")},
                      {"fit_coeffs", j.at("fit_coeffs")}};
  }
  const double mfb = by_kind["mfb"].at("test_mae_percent").get<double>();
  const double intensity = by_kind["intensity"].at("test_mae_percent").get<double>();
  json report{{"features", std::move(features)},
              {"mfb_vs_intensity_improvement_percent",
               intensity > 0.0 ? 100.0 * (1.0 - mfb / intensity) : 0.0}};

  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "report.json", std::ios::trunc);
  if (!out) throw DataError("cannot write report.json");
  out << report.dump(2) << '\n';
  write_sidecar(out_dir, "report", cfg);
  std::cout << "report: MFB " << mfb << "% vs intensity " << intensity << "% MAE\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vibration-based bridge drift regression pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, feature, manifest_path, features_dir,
      checkpoint_dir;
  std::vector<std::string> eval_dirs;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--config", config_path, "JSON config with flat dotted keys");
    sub->add_option("--out", out_dir, "output directory")->required();
    if (with_seed) sub->add_option("--seed", seed, "root random seed");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, true);

  CLI::App* extract = app.add_subcommand("extract", "extract features");
  add_common(extract, false);
  extract->add_option("--manifest", manifest_path, "dataset manifest")->required();
  extract->add_option("--feature", feature, "mfb|mfcc|intensity")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a drift regressor");
  add_common(train_cmd, true);
  train_cmd->add_option("--features", features_dir, "extracted feature directory")
      ->required();
  train_cmd->add_option("--feature", feature, "expected feature kind (checked)");

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "evaluate on the test split");
  add_common(evaluate_cmd, false);
  evaluate_cmd->add_option("--features", features_dir, "extracted feature directory")
      ->required();
  evaluate_cmd->add_option("--checkpoint", checkpoint_dir, "training output directory")
      ->required();

  CLI::App* report_cmd = app.add_subcommand("report", "aggregate the comparison");
  add_common(report_cmd, false);
  report_cmd->add_option("--eval", eval_dirs, "evaluation output directories (x3)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    ConfigMap cfg;
    if (!config_path.empty()) cfg.load(config_path);
    cfg.note("seed", seed);
    if (synth->parsed()) return cmd_synth(cfg, seed, out_dir);
    if (extract->parsed()) return cmd_extract(cfg, manifest_path, feature, out_dir);
    if (train_cmd->parsed())
      return cmd_train(cfg, features_dir, feature, seed, out_dir);
    if (evaluate_cmd->parsed())
      return cmd_evaluate(cfg, features_dir, checkpoint_dir, out_dir);
    if (report_cmd->parsed()) return cmd_report(cfg, eval_dirs, out_dir);
    throw UsageError("no subcommand selected");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
