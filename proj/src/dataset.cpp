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

#include "qcep/dataset.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include <json.hpp>

#include "qcep/error.hpp"
#include "qcep/parallel.hpp"
#include "qcep/tensor_io.hpp"

namespace qcep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  return j;
}

void dump_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace

void write_manifest(const std::string& path, const Manifest& m) {
  json events = json::array();
  for (const ManifestEvent& e : m.events) {
    events.push_back({{"event_id", e.event_id},
                      {"gm_id", e.gm_id},
                      {"angle_deg", e.angle_deg},
                      {"scale", e.scale},
                      {"drift_ratio", e.drift_ratio},
                      {"record", e.record_path}});
  }
  dump_json(path, json{{"version", 1},
                       {"sr", m.sr},
                       {"seed", m.seed},
                       {"events", std::move(events)}});
}

Manifest read_manifest(const std::string& path) {
  const json j = load_json(path);
  Manifest m;
  try {
    m.sr = j.at("sr").get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (const json& e : j.at("events")) {
      ManifestEvent ev;
      ev.event_id = e.at("event_id").get<std::string>();
      ev.gm_id = e.at("gm_id").get<std::uint64_t>();
      ev.angle_deg = e.at("angle_deg").get<double>();
      ev.scale = e.at("scale").get<double>();
      ev.drift_ratio = e.at("drift_ratio").get<double>();
      ev.record_path = e.at("record").get<std::string>();
      m.events.push_back(std::move(ev));
    }
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (m.events.empty()) throw DataError(path + ": manifest lists no events");
  return m;
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "mfb") return FeatureKind::kMfb;
  if (name == "mfcc") return FeatureKind::kMfcc;
  if (name == "intensity") return FeatureKind::kIntensity;
  throw UsageError("unknown feature kind '" + name + "' (expected mfb|mfcc|intensity)");
}

std::string feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kMfb: return "mfb";
    case FeatureKind::kMfcc: return "mfcc";
    case FeatureKind::kIntensity: return "intensity";
  }
  throw DataError("invalid feature kind");
}

FusedTensor extract_fused(const MultiChannelRecord& rec, FeatureKind kind,
                          const ExtractConfig& cfg) {
  if (kind == FeatureKind::kIntensity) {
    throw DataError("extract_fused: intensity features are not frame-based");
  }
  const FilterBank fb = build_filterbank(rec.sr(), cfg.n_filters, cfg.n_fft);
  const FftPlan plan(cfg.n_fft);

  auto channel_tensor = [&](const AccelRecord& ch) {
    const FrameSet frames = frame_signal(ch, cfg.window_s, cfg.stride_s);
    std::vector<Periodogram> specs;
    specs.reserve(frames.n_w());
    for (const auto& frame : frames.frames) {
      specs.push_back(periodogram(frame, plan, ch.sr));
    }
    CepstralTensor t = mfb(specs, fb, cfg.n_keep);
    if (kind == FeatureKind::kMfcc) t = dct_mfcc(t);
    return t;
  };

  return fuse(channel_tensor(rec.top_x), channel_tensor(rec.bot_x),
              channel_tensor(rec.top_y), channel_tensor(rec.bot_y));
}

std::vector<double> extract_intensity(const MultiChannelRecord& rec) {
  return intensity_vector(rec).values;
}

std::size_t extract_dataset(const Manifest& manifest,
                            const std::string& manifest_dir, FeatureKind kind,
                            const ExtractConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::size_t n = manifest.events.size();
  std::vector<std::string> tensor_files(n);
  std::vector<std::vector<double>> intensity_rows(n);
  std::vector<char> failed(n, 0);
  std::mutex log_mutex;

  parallel_for(n, [&](std::size_t i) {
    const ManifestEvent& ev = manifest.events[i];
    try {
      const MultiChannelRecord rec =
          read_multichannel_csv((fs::path(manifest_dir) / ev.record_path).string());
      if (kind == FeatureKind::kIntensity) {
        intensity_rows[i] = extract_intensity(rec);
      } else {
        const FusedTensor fused = extract_fused(rec, kind, cfg);
        const std::string name = ev.event_id + ".qct";
        write_qct((fs::path(out_dir) / name).string(), fused,
                  kind == FeatureKind::kMfb ? TensorKind::kFusedMfb
                                            : TensorKind::kFusedMfcc);
        tensor_files[i] = name;
      }
    } catch (const Error& e) {
      std::scoped_lock lock(log_mutex);
      std::cerr << "extract: event " << ev.event_id << ": " << e.what() << "\n";
      failed[i] = 1;
    }
  });

  if (kind == FeatureKind::kIntensity) {
    std::ofstream csv(fs::path(out_dir) / "intensity.csv", std::ios::trunc);
    if (!csv) throw DataError("cannot write intensity.csv");
    csv << "event_id";
    for (std::size_t k = 0; k < 40; ++k) csv << ",i" << k;
    csv << "\n";
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
      if (failed[i]) continue;
      csv << manifest.events[i].event_id;
      for (double v : intensity_rows[i]) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        csv << buf;
      }
      csv << "\n";
    }
  }

  json index_events = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) continue;
    const ManifestEvent& ev = manifest.events[i];
    json e{{"event_id", ev.event_id},
           {"gm_id", ev.gm_id},
           {"angle_deg", ev.angle_deg},
           {"scale", ev.scale},
           {"drift_ratio", ev.drift_ratio}};
    if (kind != FeatureKind::kIntensity) e["tensor"] = tensor_files[i];
    index_events.push_back(std::move(e));
  }
  json index{{"version", 1},
             {"kind", feature_kind_name(kind)},
             {"config", {{"window_s", cfg.window_s},
                         {"stride_s", cfg.stride_s},
                         {"n_fft", cfg.n_fft},
                         {"n_filters", cfg.n_filters},
                         {"n_keep", cfg.n_keep}}},
             {"events", std::move(index_events)}};
  if (kind == FeatureKind::kIntensity) index["intensity_csv"] = "intensity.csv";
  dump_json((fs::path(out_dir) / "index.json").string(), index);

  std::size_t n_failed = 0;
  for (char f : failed) n_failed += f;
  return n_failed;
}

FeatureSet load_feature_set(const std::string& index_path) {
  const json j = load_json(index_path);
  const fs::path dir = fs::path(index_path).parent_path();

  FeatureSet set;
  try {
    set.kind = parse_feature_kind(j.at("kind").get<std::string>());
    for (const json& e : j.at("events")) {
      FeatureEvent ev;
      ev.event_id = e.at("event_id").get<std::string>();
      ev.gm_id = e.at("gm_id").get<std::uint64_t>();
      ev.angle_deg = e.at("angle_deg").get<double>();
      ev.scale = e.at("scale").get<double>();
      ev.drift_ratio = e.at("drift_ratio").get<double>();
      if (set.kind != FeatureKind::kIntensity) {
        ev.fused = read_qct_fused((dir / e.at("tensor").get<std::string>()).string());
      }
      set.events.push_back(std::move(ev));
    }
  } catch (const json::exception& e) {
    throw DataError(index_path + ": " + e.what());
  }

  if (set.kind == FeatureKind::kIntensity) {
    const std::string csv_path = (dir / "intensity.csv").string();
    std::ifstream csv(csv_path);
    if (!csv) throw DataError("cannot open '" + csv_path + "'");
    std::string line;
    std::getline(csv, line);  // header
    std::size_t row = 0;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      if (row >= set.events.size()) {
        throw DataError(csv_path + ": more rows than indexed events");
      }
      std::vector<double> values;
      std::size_t pos = line.find(',');
      const std::string id = line.substr(0, pos);
      if (id != set.events[row].event_id) {
        throw DataError(csv_path + ": row order does not match index.json");
      }
      while (pos != std::string::npos) {
        const std::size_t next = line.find(',', pos + 1);
        values.push_back(std::stod(line.substr(pos + 1, next - pos - 1)));
        pos = next;
      }
      if (values.size() != 40) {
        throw DataError(csv_path + ": expected 40 intensity values per row");
      }
      set.events[row].vec = std::move(values);
      ++row;
    }
    if (row != set.events.size()) {
      throw DataError(csv_path + ": fewer rows than indexed events");
    }
  }
  if (set.events.empty()) throw DataError(index_path + ": no events");
  return set;
}

}  // namespace qcep
