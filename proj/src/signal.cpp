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

#include "qcep/signal.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qcep/error.hpp"

namespace qcep {

void AccelRecord::validate() const {
  if (sr <= 0.0) {
    throw DataError("record '" + channel_id + "': sampling rate must be > 0");
  }
  if (samples.empty()) {
    throw DataError("record '" + channel_id + "': no samples");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw DataError("record '" + channel_id + "': non-finite sample at index " +
                      std::to_string(i));
    }
  }
}

FrameSet frame_signal(const AccelRecord& rec, double window_len_s,
                      double stride_s) {
  if (!(stride_s > 0.0) || window_len_s < stride_s) {
    throw DataError("frame_signal: need window_len_s >= stride_s > 0");
  }
  rec.validate();

  const auto window = static_cast<std::size_t>(std::lround(window_len_s * rec.sr));
  const auto stride = static_cast<std::size_t>(std::lround(stride_s * rec.sr));
  if (window == 0 || stride == 0) {
    throw DataError("frame_signal: window or stride rounds to zero samples");
  }

  const std::size_t len = rec.samples.size();
  const std::size_t overflow = len > window ? len - window : 0;
  const std::size_t n_w = 1 + (overflow + stride - 1) / stride;

  FrameSet out;
  out.window_len_s = window_len_s;
  out.stride_s = stride_s;
  out.window_samples = window;
  out.stride_samples = stride;
  out.frames.resize(n_w);
  for (std::size_t i = 0; i < n_w; ++i) {
    auto& frame = out.frames[i];
    frame.assign(window, 0.0);
    const std::size_t start = i * stride;
    for (std::size_t j = 0; j < window && start + j < len; ++j) {
      frame[j] = rec.samples[start + j];
    }
  }
  return out;
}

void MultiChannelRecord::validate() const {
  top_x.validate();
  top_y.validate();
  bot_x.validate();
  bot_y.validate();
  for (const AccelRecord* ch : {&top_y, &bot_x, &bot_y}) {
    if (ch->sr != top_x.sr || ch->samples.size() != top_x.samples.size()) {
      throw DataError("multichannel record: channels disagree on sr or length");
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& path, std::size_t lineno) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

CsvTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable tab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (tab.header.empty()) {
      tab.header = fields;
      tab.columns.resize(fields.size());
      continue;
    }
    if (fields.size() != tab.header.size()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(tab.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      tab.columns[c].push_back(parse_double(fields[c], path, lineno));
    }
  }
  if (tab.header.empty() || tab.columns[0].empty()) {
    throw DataError(path + ": empty record file");
  }
  return tab;
}

// Infers sr from the time column and checks uniformity within 1e-6 relative.
double infer_sr(const std::vector<double>& t, const std::string& path) {
  if (t.size() < 2) throw DataError(path + ": need at least 2 rows to infer sr");
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw DataError(path + ": time column not increasing");
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double step = t[i + 1] - t[i];
    if (std::fabs(step - dt) > 1e-6 * dt) {
      throw DataError(path + ": non-uniform time step at row " + std::to_string(i + 2));
    }
  }
  return 1.0 / dt;
}

}  // namespace

AccelRecord read_accel_csv(const std::string& path, double sr_override) {
  CsvTable tab = read_table(path);
  if (tab.header.size() != 2) {
    throw DataError(path + ": expected header 't,value'");
  }
  AccelRecord rec;
  rec.sr = sr_override > 0.0 ? sr_override : infer_sr(tab.columns[0], path);
  rec.samples = std::move(tab.columns[1]);
  rec.channel_id = tab.header[1];
  rec.validate();
  return rec;
}

MultiChannelRecord read_multichannel_csv(const std::string& path,
                                         double sr_override) {
  CsvTable tab = read_table(path);
  if (tab.header.size() != 5) {
    throw DataError(path + ": expected header 't,ax_top,ay_top,ax_bot,ay_bot'");
  }
  const double sr = sr_override > 0.0 ? sr_override : infer_sr(tab.columns[0], path);
  MultiChannelRecord rec;
  rec.top_x = {std::move(tab.columns[1]), sr, "top_x"};
  rec.top_y = {std::move(tab.columns[2]), sr, "top_y"};
  rec.bot_x = {std::move(tab.columns[3]), sr, "bot_x"};
  rec.bot_y = {std::move(tab.columns[4]), sr, "bot_y"};
  rec.validate();
  return rec;
}

void write_multichannel_csv(const std::string& path,
                            const MultiChannelRecord& rec) {
  rec.validate();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write '" + path + "'");
  std::fputs("t,ax_top,ay_top,ax_bot,ay_bot\n", f);
  const double dt = 1.0 / rec.sr();
  for (std::size_t i = 0; i < rec.top_x.samples.size(); ++i) {
    std::fprintf(f, "%.6f,%.17g,%.17g,%.17g,%.17g\n", static_cast<double>(i) * dt,
                 rec.top_x.samples[i], rec.top_y.samples[i], rec.bot_x.samples[i],
                 rec.bot_y.samples[i]);
  }
  std::fclose(f);
}

}  // namespace qcep
