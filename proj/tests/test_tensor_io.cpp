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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qcep/error.hpp"
#include "qcep/rng.hpp"
#include "qcep/tensor_io.hpp"

using namespace qcep;
namespace fs = std::filesystem;

TEST_CASE("qct round trip preserves a cepstral tensor bit for bit") {
  const fs::path path = fs::temp_directory_path() / "qcep_test_tensor.qct";
  CepstralTensor t;
  t.kind = CepstralKind::kMfcc;
  t.n_w = 7;
  t.n_keep = 8;
  t.values.resize(56);
  Rng rng(2);
  for (double& v : t.values) v = rng.normal();

  write_qct(path.string(), t);
  CHECK(peek_qct_kind(path.string()) == TensorKind::kMfcc);
  const CepstralTensor back = read_qct_cepstral(path.string());
  CHECK(back.kind == CepstralKind::kMfcc);
  CHECK(back.n_w == 7);
  CHECK(back.n_keep == 8);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    CHECK(back.values[i] == t.values[i]);
  }
  fs::remove(path);
}

TEST_CASE("qct round trip preserves a fused tensor and its mask") {
  const fs::path path = fs::temp_directory_path() / "qcep_test_fused.qct";
  FusedTensor t;
  t.n_w = 99;
  t.values.assign(kMaxFrames * 16, 0.0);
  t.mask.assign(kMaxFrames, false);
  Rng rng(4);
  for (std::size_t i = 0; i < t.n_w; ++i) {
    t.mask[i] = true;
    for (std::size_t k = 0; k < 16; ++k) t.values[i * 16 + k] = rng.normal();
  }

  write_qct(path.string(), t, TensorKind::kFusedMfb);
  const FusedTensor back = read_qct_fused(path.string());
  CHECK(back.n_w == 99);
  CHECK(back.values == t.values);
  CHECK(back.mask == t.mask);
  CHECK_THROWS_AS(read_qct_cepstral(path.string()), DataError);
  fs::remove(path);
}

TEST_CASE("qct reader rejects garbage") {
  const fs::path path = fs::temp_directory_path() / "qcep_test_bad.qct";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE-not-a-tensor";
  }
  CHECK_THROWS_AS(read_qct_fused(path.string()), DataError);
  CHECK_THROWS_AS(read_qct_cepstral("/nonexistent/file.qct"), DataError);
  fs::remove(path);
}
