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

#ifndef QCEP_DATASET_HPP_
#define QCEP_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "qcep/features.hpp"

namespace qcep {

// Dataset manifest: one entry per simulated event, with the channel file path
// relative to the manifest's directory.
struct ManifestEvent {
  std::string event_id;
  std::uint64_t gm_id = 0;
  double angle_deg = 0.0;
  double scale = 1.0;
  double drift_ratio = 0.0;
  std::string record_path;
};

struct Manifest {
  double sr = 0.0;
  std::uint64_t seed = 0;
  std::vector<ManifestEvent> events;
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

enum class FeatureKind { kMfb, kMfcc, kIntensity };

FeatureKind parse_feature_kind(const std::string& name);
std::string feature_kind_name(FeatureKind kind);

// Extraction settings shared by the pipeline and the CLI sidecars.
struct ExtractConfig {
  double window_s = 1.0;
  double stride_s = 0.4;
  std::size_t n_fft = 512;
  std::size_t n_filters = 26;
  std::size_t n_keep = 8;
};

// Per-event feature data held in memory for training/evaluation. For MFB and
// MFCC kinds `fused` is set; for the intensity kind `vec` is set.
struct FeatureEvent {
  std::string event_id;
  std::uint64_t gm_id = 0;
  double angle_deg = 0.0;
  double scale = 1.0;
  double drift_ratio = 0.0;
  FusedTensor fused;
  std::vector<double> vec;
};

struct FeatureSet {
  FeatureKind kind = FeatureKind::kMfb;
  std::vector<FeatureEvent> events;

  std::size_t feature_dim() const { return kind == FeatureKind::kIntensity ? 40 : 16; }
};

// Extracts the features for a single event's four channels.
FusedTensor extract_fused(const MultiChannelRecord& rec, FeatureKind kind,
                          const ExtractConfig& cfg);
std::vector<double> extract_intensity(const MultiChannelRecord& rec);

// Runs extraction over a whole manifest (parallel per event), writing per-
// event QCT1 tensors (or one intensity CSV) plus an index JSON into out_dir.
// Events with unreadable channel files are reported on stderr and skipped;
// the number of failures is returned.
std::size_t extract_dataset(const Manifest& manifest,
                            const std::string& manifest_dir, FeatureKind kind,
                            const ExtractConfig& cfg, const std::string& out_dir);

// Loads what extract_dataset wrote.
FeatureSet load_feature_set(const std::string& index_path);

}  // namespace qcep

#endif  // QCEP_DATASET_HPP_
