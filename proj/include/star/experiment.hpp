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

// Training loops, evaluation, ablation variants and selection heatmaps.
//
// Ablation variants (components: a selection, b observation encoder,
// c convolutional merge, d temporal selection, e multiple agents):
//
//   S1  plain CNN baseline, no selection at all
//   S2  a        one agent, raw glimpse into the core, no merge, no time action
//   S3  a+b      S2 plus the observation encoder
//   S4  a+b+c    S3 plus the 1 x M convolutional merge
//   S5  a+b+c+d  S4 plus the shared time action
//   S6  all      the full model with H agents
//
// Without the time action the time coordinate keeps its random initial
// value for the whole episode.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "star/checkpoint.hpp"
#include "star/config.hpp"
#include "star/data.hpp"
#include "star/metrics.hpp"
#include "star/network.hpp"

namespace star {

RunConfig configure_ablation(Variant variant, const RunConfig& base);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double mean_reward = 0.0;
};

// Builds, initializes (cfg.seed) and trains a model for cfg.epochs.
ModelParams train_model(const RunConfig& cfg, const std::vector<Window>& train,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

// Continues training `params` in place.
void train_epochs(ModelParams& params, const std::vector<Window>& train, int epochs,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// Argmax of the Monte-Carlo averaged prediction per window.
MetricsReport evaluate_windows(const ModelParams& params, const std::vector<Window>& test, std::uint64_t key = 0);

// Applies the checkpoint's stored standardization, windows the data and
// evaluates. ConfigError when the data shape disagrees with the checkpoint.
MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& test);

// ---- selection heatmaps ------------------------------------------------------------

struct HeatmapSet {
  Index rows = 0;  // K
  Index cols = 0;  // P
  int agents = 0;
  int classes = 0;
  std::vector<Matrix> aggregate;               // [agent], counts
  std::vector<std::vector<Matrix>> per_class;  // [class][agent], counts

  static Matrix normalized(const Matrix& counts);
};

// `episodes` independent single-copy rollouts per window.
std::vector<Trajectory> rollout_windows(const ModelParams& params, std::span<const Window> windows, int episodes,
                                        std::uint64_t key = 0);

// Counts every observed (t, l_i) of every step at its denormalized grid cell.
HeatmapSet count_selections(std::span<const Trajectory> trajectories, Index rows, Index cols, int agents,
                            int classes);

HeatmapSet heatmap(const ModelParams& params, std::span<const Window> windows, int episodes,
                   std::uint64_t key = 0);

// Writes agent<i>_counts.csv / agent<i>_freq.csv for the aggregate and
// class<c>_agent<i>_{counts,freq}.csv per class. Each file is K rows x P columns.
void write_heatmaps(const HeatmapSet& set, const std::string& dir);

// episode,step,agent,label,t,l per observed location.
void write_trajectories_csv(std::span<const Trajectory> trajectories, const std::string& path);

// ---- runs ------------------------------------------------------------------------------

struct RunResult {
  Variant variant = Variant::S6;
  std::uint64_t seed = 0;
  int held_out = 0;
  MetricsReport report;
};

// Trains on every subject except `held_out` (standardized with train stats)
// and evaluates on it. S1 routes to the CNN baseline. When `trained` is not
// null the fitted model and the test windows are handed back.
RunResult run_fold(const Dataset& ds, const RunConfig& cfg, int held_out, Checkpoint* trained = nullptr,
                   std::vector<Window>* test_windows = nullptr);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
Summary summarize(std::span<const double> values);

// ---- gradient gate ---------------------------------------------------------------------

// K=8, P=6, H=2, S=3, M=1, zero policy variance, narrow layers.
RunConfig tiny_gradcheck_config();

// Central differences of the batch classification loss against the
// analytic gradient, with every trajectory frozen to a recorded replay.
// `windows` random N(0,1) windows with labels cycling through the classes.
GradCheckResult check_model_gradient(const RunConfig& cfg, std::uint64_t seed, int windows = 3,
                                     double epsilon = 1e-5, Index max_coords_per_group = 0);

}  // namespace star
