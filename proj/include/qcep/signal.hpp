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

#ifndef QCEP_SIGNAL_HPP_
#define QCEP_SIGNAL_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace qcep {

// One sensor channel's uniformly sampled acceleration history.
struct AccelRecord {
  std::vector<double> samples;
  double sr = 0.0;          // sampling rate, Hz
  std::string channel_id;   // e.g. "top_x", "bot_y"

  double duration() const {
    return static_cast<double>(samples.size()) / sr;
  }

  // Throws DataError unless sr > 0 and samples are non-empty and finite.
  void validate() const;
};

// A signal cut into overlapping fixed-length windows. Tail windows are
// zero-padded so no sample is dropped.
struct FrameSet {
  std::vector<std::vector<double>> frames;
  double window_len_s = 1.0;
  double stride_s = 0.4;
  std::size_t window_samples = 0;
  std::size_t stride_samples = 0;

  std::size_t n_w() const { return frames.size(); }
};

// Cuts rec into n_w = 1 + ceil(max(0, L - W) / S) windows, where W and S are
// the window and stride lengths rounded to whole samples. Frame i starts at
// sample i * S; samples past the end of the signal read as zero.
FrameSet frame_signal(const AccelRecord& rec, double window_len_s = 1.0,
                      double stride_s = 0.4);

// A four-channel sensor layout: accelerometers at the top and bottom of a
// pier, each recording X and Y.
struct MultiChannelRecord {
  AccelRecord top_x, top_y, bot_x, bot_y;

  double sr() const { return top_x.sr; }
  void validate() const;  // all channels finite, same sr and length
};

// Reads a record CSV. Two layouts are accepted:
//   t,value                          -> single channel
//   t,ax_top,ay_top,ax_bot,ay_bot    -> four channels
// The sampling rate is inferred from the time column (which must be uniform
// within 1e-6 relative) unless sr_override > 0.
AccelRecord read_accel_csv(const std::string& path, double sr_override = 0.0);
MultiChannelRecord read_multichannel_csv(const std::string& path,
                                         double sr_override = 0.0);

void write_multichannel_csv(const std::string& path,
                            const MultiChannelRecord& rec);

}  // namespace qcep

#endif  // QCEP_SIGNAL_HPP_
