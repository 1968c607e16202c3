// Copyright 2026 The STAR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Recordings, synthetic activity data, CSV ingestion, standardization,
// sliding windows and leave-one-subject-out splits.
//
// CSV schema (UTF-8, '.' decimal point, one time step per row):
//
//   recording,subject,label,<channel 0>,...,<channel P-1>
//
// Rows of one recording must be contiguous and agree on subject and label.
// Multi-rate sources must be resampled to a common rate before export.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "star/glimpse.hpp"
#include "star/numerics.hpp"

namespace star {

struct Recording {
  std::string id;
  int subject = 0;
  int label = 0;
  Matrix samples;  // T x P
};

struct ChannelStats {
  Vector mean;
  Vector stddev;  // floored at kStddevFloor
};

inline constexpr double kStddevFloor = 1e-8;

struct Dataset {
  std::vector<Recording> recordings;
  int num_classes = 0;
  Index channels = 0;
  std::vector<std::string> channel_names;
  std::optional<ChannelStats> stats;  // set by standardize()

  bool standardized() const { return stats.has_value(); }
  std::vector<int> subjects() const;  // sorted, unique
};

// ---- windowing ---------------------------------------------------------------

// round-half-up(K * (1 - overlap)); DomainError when the stride would be < 1.
Index window_stride(Index K, double overlap);
// floor((T - K) / stride) + 1 for T >= K, else 0.
Index window_count(Index T, Index K, double overlap);
std::vector<Window> window_recording(const Recording& rec, Index K, double overlap);
std::vector<Window> make_windows(const Dataset& ds, Index K, double overlap);

// ---- standardization ----------------------------------------------------------

// Population mean/stddev per channel over every sample of `train`.
ChannelStats compute_channel_stats(const Dataset& train);
// Z-scores each channel with `stats`. A dataset can be standardized once;
// a second call throws StateError.
Dataset standardize(const Dataset& ds, const ChannelStats& stats);

// ---- splits ----------------------------------------------------------------------

// (train, test) with test holding exactly `held_out`'s recordings.
// LookupError for an unknown subject.
std::pair<Dataset, Dataset> loso_split(const Dataset& ds, int held_out);

// ---- synthetic data --------------------------------------------------------------

struct Band {
  int begin = 0;
  int end = 0;  // exclusive
};

// Each class owns a channel band and a time band. The time band is a phase
// interval within one window stride and repeats every stride samples, so
// every window cut at the standard stride shows the same pattern.
struct SynthConfig {
  int classes = 4;
  int channels = 24;
  int window_length = 20;
  double overlap = 0.5;
  std::vector<Band> channel_bands;
  std::vector<Band> time_bands;
  double amplitude = 5.0;
  // 0: one positive half-period spanning the time band. n > 0: a full
  // cosine with an n-sample period, zero-mean over whole periods.
  int period = 0;
  double noise_stddev = 1.0;
  int recordings_per_class = 1;  // per subject
  int windows_per_recording = 4;
  int subjects = 8;

  // C=4, P=24, K=20 with four disjoint 6-channel bands.
  static SynthConfig defaults();

  int stride() const;
  Index recording_length() const;
  // Whether window cell (row, col) lies in `label`'s active region.
  bool in_band(int label, Index row, Index col) const;
  Index band_area(int label) const;
  void validate() const;
};

Dataset synth_generate(const SynthConfig& synth, std::uint64_t seed);

// ---- CSV -----------------------------------------------------------------------------

struct CsvSchema {
  Index channels = 0;   // 0: take from the header
  int num_classes = 0;  // 0: max label + 1
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace star
