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

#include <cstdint>
#include <iosfwd>
#include <string>

#include "star/glimpse.hpp"

namespace star {

enum class Variant { S1, S2, S3, S4, S5, S6 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& tag);  // ConfigError on unknown tags

enum class ReinforceTarget {
  kActionLogDensity,    // score of the sampled locations/times (default)
  kClassLogLikelihood,  // reward-weighted log-likelihood of the label at every step
};

// Every hyperparameter of a run. Defaults follow the published setting where
// one exists; optimizer and schedule values are plain engineering defaults.
struct RunConfig {
  int window_length = 20;  // K
  int channels = 23;       // P
  int classes = 12;        // C
  int agents = 3;          // H
  int episode_length = 40; // S
  int copies = 5;          // M, Monte-Carlo duplicates

  int enc_glimpse_width = 128;
  int enc_loc_width = 128;
  int enc_out_width = 220;
  int conv_filters = 40;
  int core_width = 220;

  double variance = 0.22;
  double time_variance = -1.0;  // < 0: same as variance
  int n_scales = 3;
  int scale_factor = 2;

  double learning_rate = 0.1;
  double clip_norm = 10.0;
  int batch_size = 4;
  int epochs = 10;
  double overlap = 0.5;

  double reinforce_weight = 1.0;
  ReinforceTarget reinforce_target = ReinforceTarget::kActionLogDensity;
  bool use_baseline = true;
  double baseline_decay = 0.9;

  bool per_agent_encoders = false;
  bool use_encoder = true;
  bool use_conv_merge = true;
  bool use_time_action = true;
  Variant variant = Variant::S6;

  std::uint64_t seed = 1;
  int workers = 1;
  int shard_windows = 8;  // windows per gradient shard; fixes the reduction order

  double effective_time_variance() const { return time_variance < 0.0 ? variance : time_variance; }
  GlimpseGeometry glimpse_geometry() const;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// Flat `key=value` text; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);
// All keys, one per line, in a fixed order. Reals use shortest round-trip form.
std::string config_to_text(const RunConfig& cfg);

}  // namespace star
