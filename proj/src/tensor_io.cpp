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

#include "qcep/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "qcep/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "QCT1/QNN1 writers assume a little-endian host");

namespace qcep {

namespace {

constexpr char kMagic[4] = {'Q', 'C', 'T', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError(path + ": truncated QCT1 header");
  }
  return v;
}

struct Header {
  TensorKind kind;
  std::uint32_t n_w;
  std::uint32_t n_cols;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

std::pair<std::ifstream, Header> open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(path + ": not a QCT1 tensor file");
  }
  Header h;
  const std::uint32_t kind = get_u32(in, path);
  if (kind > 3) throw DataError(path + ": unknown tensor kind " + std::to_string(kind));
  h.kind = static_cast<TensorKind>(kind);
  h.n_w = get_u32(in, path);
  h.n_cols = get_u32(in, path);
  return {std::move(in), h};
}

void read_values(std::ifstream& in, const std::string& path, std::vector<double>& dst) {
  if (!in.read(reinterpret_cast<char*>(dst.data()),
               static_cast<std::streamsize>(dst.size() * sizeof(double)))) {
    throw DataError(path + ": truncated QCT1 payload");
  }
}

}  // namespace

void write_qct(const std::string& path, const CepstralTensor& t) {
  t.validate();
  auto out = open_out(path);
  out.write(kMagic, 4);
  put_u32(out, t.kind == CepstralKind::kMfb
                   ? static_cast<std::uint32_t>(TensorKind::kMfb)
                   : static_cast<std::uint32_t>(TensorKind::kMfcc));
  put_u32(out, static_cast<std::uint32_t>(t.n_w));
  put_u32(out, static_cast<std::uint32_t>(t.n_keep));
  out.write(reinterpret_cast<const char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_qct(const std::string& path, const FusedTensor& t, TensorKind kind) {
  if (kind != TensorKind::kFusedMfb && kind != TensorKind::kFusedMfcc) {
    throw DataError("write_qct: fused tensor requires a fused kind");
  }
  auto out = open_out(path);
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(kind));
  put_u32(out, static_cast<std::uint32_t>(t.n_w));
  put_u32(out, static_cast<std::uint32_t>(t.n_cols));
  out.write(reinterpret_cast<const char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!out) throw DataError("write failed for '" + path + "'");
}

CepstralTensor read_qct_cepstral(const std::string& path) {
  auto [in, h] = open_in(path);
  if (h.kind != TensorKind::kMfb && h.kind != TensorKind::kMfcc) {
    throw DataError(path + ": expected a plain cepstral tensor");
  }
  CepstralTensor t;
  t.kind = h.kind == TensorKind::kMfb ? CepstralKind::kMfb : CepstralKind::kMfcc;
  t.n_w = h.n_w;
  t.n_keep = h.n_cols;
  t.values.resize(static_cast<std::size_t>(h.n_w) * h.n_cols);
  read_values(in, path, t.values);
  t.validate();
  return t;
}

FusedTensor read_qct_fused(const std::string& path) {
  auto [in, h] = open_in(path);
  if (h.kind != TensorKind::kFusedMfb && h.kind != TensorKind::kFusedMfcc) {
    throw DataError(path + ": expected a fused tensor");
  }
  FusedTensor t;
  t.n_w = h.n_w;
  t.n_cols = h.n_cols;
  if (t.n_w > kMaxFrames) {
    throw DataError(path + ": n_w exceeds the frame cap");
  }
  t.values.resize(kMaxFrames * t.n_cols);
  read_values(in, path, t.values);
  t.mask.assign(kMaxFrames, false);
  for (std::size_t i = 0; i < t.n_w; ++i) t.mask[i] = true;
  return t;
}

TensorKind peek_qct_kind(const std::string& path) {
  auto [in, h] = open_in(path);
  return h.kind;
}

}  // namespace qcep
