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

#ifndef QCEP_TENSOR_IO_HPP_
#define QCEP_TENSOR_IO_HPP_

#include <string>

#include "qcep/cepstral.hpp"
#include "qcep/features.hpp"

namespace qcep {

// QCT1: versioned little-endian binary tensor file.
//
//   bytes 0..3   magic "QCT1"
//   u32          kind: 0 = MFB, 1 = MFCC, 2 = fused MFB, 3 = fused MFCC
//   u32          n_w (valid frame rows)
//   u32          n_cols
//   f64[...]     row-major values
//
// Plain kinds store n_w rows. Fused kinds store the full padded block of
// kMaxFrames rows; the mask is implied by n_w (rows < n_w are valid).
enum class TensorKind : std::uint32_t {
  kMfb = 0,
  kMfcc = 1,
  kFusedMfb = 2,
  kFusedMfcc = 3,
};

void write_qct(const std::string& path, const CepstralTensor& t);
void write_qct(const std::string& path, const FusedTensor& t, TensorKind kind);

CepstralTensor read_qct_cepstral(const std::string& path);
FusedTensor read_qct_fused(const std::string& path);
TensorKind peek_qct_kind(const std::string& path);

}  // namespace qcep

#endif  // QCEP_TENSOR_IO_HPP_
