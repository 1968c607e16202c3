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

#include "star/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "star/cnn_baseline.hpp"
#include "star/errors.hpp"
#include "star/rng.hpp"

namespace star {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5f1e;
constexpr std::uint64_t kHeatmapStream = 0x4ea7;

void write_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << "\n";
  }
}

}  // namespace

RunConfig configure_ablation(Variant variant, const RunConfig& base) {
  RunConfig cfg = base;
  cfg.variant = variant;
  switch (variant) {
    case Variant::S1:
    case Variant::S6:
      break;
    case Variant::S2:
      cfg.agents = 1;
      cfg.use_encoder = false;
      cfg.use_conv_merge = false;
      cfg.use_time_action = false;
      break;
    case Variant::S3:
      cfg.agents = 1;
      cfg.use_encoder = true;
      cfg.use_conv_merge = false;
      cfg.use_time_action = false;
      break;
    case Variant::S4:
      cfg.agents = 1;
      cfg.use_encoder = true;
      cfg.use_conv_merge = true;
      cfg.use_time_action = false;
      break;
    case Variant::S5:
      cfg.agents = 1;
      cfg.use_encoder = true;
      cfg.use_conv_merge = true;
      cfg.use_time_action = true;
      break;
  }
  return cfg;
}

void train_epochs(ModelParams& params, const std::vector<Window>& train, int epochs,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  const RunConfig& cfg = params.config;
  Trainer trainer(params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log{epoch, 0.0, 0.0};
    double weight = 0.0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      std::vector<const Window*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + bs); ++i) batch.push_back(&train[order[i]]);
      const TrainStats s = trainer.train_step(batch, (static_cast<std::uint64_t>(epoch) << 32) | step++);
      const auto n = static_cast<double>(batch.size());
      log.loss += s.loss * n;
      log.mean_reward += s.mean_reward * n;
      weight += n;
    }
    if (weight > 0.0) {
      log.loss /= weight;
      log.mean_reward /= weight;
    }
    if (on_epoch) on_epoch(log);
  }
}

ModelParams train_model(const RunConfig& cfg, const std::vector<Window>& train,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  ModelParams params = make_model_params(cfg);
  init_model_params(params, cfg.seed);
  train_epochs(params, train, cfg.epochs, on_epoch);
  return params;
}

MetricsReport evaluate_windows(const ModelParams& params, const std::vector<Window>& test, std::uint64_t key) {
  const Matrix probs = predict_windows(params, test, key);
  std::vector<int> labels, preds;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Index best = 0;
    probs.col(static_cast<Index>(i)).maxCoeff(&best);
    labels.push_back(test[i].label);
    preds.push_back(static_cast<int>(best));
  }
  return compute_metrics(params.config.classes, labels, preds);
}

MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& test) {
  const RunConfig& cfg = ckpt.params.config;
  if (test.channels != cfg.channels) {
    throw ConfigError("evaluate: data has " + std::to_string(test.channels) + " channels, checkpoint expects " +
                      std::to_string(cfg.channels));
  }
  if (test.num_classes > cfg.classes) {
    throw ConfigError("evaluate: data has " + std::to_string(test.num_classes) +
                      " classes, checkpoint expects " + std::to_string(cfg.classes));
  }
  const Dataset ready = ckpt.stats && !test.standardized() ? standardize(test, *ckpt.stats) : test;
  return evaluate_windows(ckpt.params, make_windows(ready, cfg.window_length, cfg.overlap));
}

Matrix HeatmapSet::normalized(const Matrix& counts) {
  const double total = counts.sum();
  return total > 0.0 ? Matrix(counts / total) : counts;
}

std::vector<Trajectory> rollout_windows(const ModelParams& params, std::span<const Window> windows, int episodes,
                                        std::uint64_t key) {
  const RunConfig& cfg = params.config;
  const auto per_shard = static_cast<std::size_t>(cfg.shard_windows * cfg.copies);
  std::vector<const Window*> cols;
  std::vector<Rng> streams;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (int e = 0; e < episodes; ++e) {
      cols.push_back(&windows[i]);
      streams.push_back(make_stream(cfg.seed, {kHeatmapStream, key, i, static_cast<std::uint64_t>(e)}));
    }
  }
  std::vector<Trajectory> out;
  out.reserve(cols.size());
  for (std::size_t b = 0; b < cols.size(); b += per_shard) {
    const std::size_t e = std::min(cols.size(), b + per_shard);
    Rollout r(params, std::vector<const Window*>(cols.begin() + static_cast<std::ptrdiff_t>(b),
                                                 cols.begin() + static_cast<std::ptrdiff_t>(e)),
              std::span<Rng>(streams).subspan(b, e - b));
    for (Index k = 0; k < r.columns(); ++k) out.push_back(r.trajectory(k));
  }
  return out;
}

HeatmapSet count_selections(std::span<const Trajectory> trajectories, Index rows, Index cols, int agents,
                            int classes) {
  HeatmapSet set;
  set.rows = rows;
  set.cols = cols;
  set.agents = agents;
  set.classes = classes;
  set.aggregate.assign(static_cast<std::size_t>(agents), Matrix::Zero(rows, cols));
  set.per_class.assign(static_cast<std::size_t>(classes), set.aggregate);
  for (const Trajectory& traj : trajectories) {
    for (const StepRecord& step : traj.steps) {
      for (int a = 0; a < agents; ++a) {
        const NormalizedLocation& loc = step.observed.at(static_cast<std::size_t>(a));
        const Index r = denormalize(loc.t, rows);
        const Index c = denormalize(loc.l, cols);
        set.aggregate[static_cast<std::size_t>(a)](r, c) += 1.0;
        if (traj.label >= 0 && traj.label < classes) {
          set.per_class[static_cast<std::size_t>(traj.label)][static_cast<std::size_t>(a)](r, c) += 1.0;
        }
      }
    }
  }
  return set;
}

HeatmapSet heatmap(const ModelParams& params, std::span<const Window> windows, int episodes, std::uint64_t key) {
  if (episodes < 1) throw ConfigError("heatmap: episodes must be >= 1");
  const RunConfig& cfg = params.config;
  const auto trajs = rollout_windows(params, windows, episodes, key);
  return count_selections(trajs, cfg.window_length, cfg.channels, cfg.agents, cfg.classes);
}

void write_heatmaps(const HeatmapSet& set, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  for (int a = 0; a < set.agents; ++a) {
    const std::string stem = "agent" + std::to_string(a);
    const Matrix& counts = set.aggregate[static_cast<std::size_t>(a)];
    write_matrix_csv(counts, (base / (stem + "_counts.csv")).string());
    write_matrix_csv(HeatmapSet::normalized(counts), (base / (stem + "_freq.csv")).string());
    for (int c = 0; c < set.classes; ++c) {
      const std::string cstem = "class" + std::to_string(c) + "_" + stem;
      const Matrix& cc = set.per_class[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)];
      write_matrix_csv(cc, (base / (cstem + "_counts.csv")).string());
      write_matrix_csv(HeatmapSet::normalized(cc), (base / (cstem + "_freq.csv")).string());
    }
  }
}

void write_trajectories_csv(std::span<const Trajectory> trajectories, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.precision(17);
  out << "episode,step,agent,label,t,l\n";
  for (std::size_t e = 0; e < trajectories.size(); ++e) {
    const Trajectory& traj = trajectories[e];
    for (std::size_t s = 0; s < traj.steps.size(); ++s) {
      const auto& observed = traj.steps[s].observed;
      for (std::size_t a = 0; a < observed.size(); ++a) {
        out << e << ',' << s << ',' << a << ',' << traj.label << ',' << observed[a].t << ',' << observed[a].l
            << '\n';
      }
    }
  }
}

RunResult run_fold(const Dataset& ds, const RunConfig& cfg, int held_out, Checkpoint* trained,
                   std::vector<Window>* test_windows) {
  auto [train_raw, test_raw] = loso_split(ds, held_out);
  const ChannelStats stats = compute_channel_stats(train_raw);
  const Dataset train = standardize(train_raw, stats);
  const Dataset test = standardize(test_raw, stats);
  auto train_w = make_windows(train, cfg.window_length, cfg.overlap);
  auto test_w = make_windows(test, cfg.window_length, cfg.overlap);

  RunResult result;
  result.variant = cfg.variant;
  result.seed = cfg.seed;
  result.held_out = held_out;
  if (cfg.variant == Variant::S1) {
    result.report = cnn_baseline_train_eval(train_w, test_w, cfg);
  } else {
    ModelParams params = train_model(cfg, train_w);
    result.report = evaluate_windows(params, test_w);
    if (trained != nullptr) *trained = Checkpoint{std::move(params), stats};
  }
  if (test_windows != nullptr) *test_windows = std::move(test_w);
  return result;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

RunConfig tiny_gradcheck_config() {
  RunConfig cfg;
  cfg.window_length = 8;
  cfg.channels = 6;
  cfg.classes = 3;
  cfg.agents = 2;
  cfg.episode_length = 3;
  cfg.copies = 1;
  cfg.enc_glimpse_width = 10;
  cfg.enc_loc_width = 10;
  cfg.enc_out_width = 12;
  cfg.conv_filters = 4;
  cfg.core_width = 9;
  cfg.variance = 0.0;
  return cfg;
}

GradCheckResult check_model_gradient(const RunConfig& cfg, std::uint64_t seed, int windows, double epsilon,
                                     Index max_coords_per_group) {
  cfg.validate();
  if (windows < 1) throw ConfigError("check_model_gradient: windows must be >= 1");
  Rng data_rng = make_stream(seed, {0xda7a});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Window> ws(static_cast<std::size_t>(windows));
  for (int i = 0; i < windows; ++i) {
    Window& w = ws[static_cast<std::size_t>(i)];
    w.values.resize(cfg.window_length, cfg.channels);
    for (Index r = 0; r < w.values.rows(); ++r) {
      for (Index c = 0; c < w.values.cols(); ++c) w.values(r, c) = normal(data_rng);
    }
    w.label = i % cfg.classes;
  }

  ModelParams params = make_model_params(cfg);
  init_model_params(params, seed);
  std::vector<const Window*> batch;
  for (const Window& w : ws) batch.push_back(&w);

  const auto M = static_cast<std::size_t>(cfg.copies);
  std::vector<const Window*> cols;
  for (const Window* w : batch) cols.insert(cols.end(), M, w);
  auto streams_for = [&]() {
    std::vector<Rng> s;
    for (std::size_t k = 0; k < cols.size(); ++k) s.push_back(make_stream(seed, {0x9c, k}));
    return s;
  };
  std::vector<Trajectory> recorded;
  {
    auto streams = streams_for();
    Rollout r(params, cols, streams);
    for (Index k = 0; k < r.columns(); ++k) recorded.push_back(r.trajectory(k));
  }
  std::vector<const Trajectory*> replay;
  for (const Trajectory& t : recorded) replay.push_back(&t);

  Trainer trainer(params);
  const auto objective = [&](bool with_gradient) {
    if (with_gradient) return trainer.accumulate_gradients(batch, 0, replay).loss;
    auto streams = streams_for();
    Rollout r(params, cols, streams, replay);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double mean_py = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        mean_py += r.final_probs()(batch[i]->label, static_cast<Index>(i * M + m));
      }
      loss -= std::log(mean_py / static_cast<double>(M));
    }
    return loss / static_cast<double>(batch.size());
  };
  const auto groups = params.pointers();
  return grad_check(objective, groups, epsilon, max_coords_per_group);
}

}  // namespace star
