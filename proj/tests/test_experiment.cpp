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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "star/cnn_baseline.hpp"
#include "star/errors.hpp"
#include "star/experiment.hpp"

namespace star {
namespace {

namespace fs = std::filesystem;

RunConfig small_config() {
  RunConfig cfg;
  cfg.channels = 24;
  cfg.classes = 4;
  cfg.episode_length = 6;
  cfg.copies = 2;
  cfg.enc_glimpse_width = 12;
  cfg.enc_loc_width = 12;
  cfg.enc_out_width = 14;
  cfg.conv_filters = 4;
  cfg.core_width = 10;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  return cfg;
}

Dataset small_dataset(std::uint64_t seed) {
  SynthConfig synth = SynthConfig::defaults();
  synth.subjects = 3;
  return synth_generate(synth, seed);
}

TEST(Ablation, VariantMapping) {
  const RunConfig base;
  const RunConfig s2 = configure_ablation(Variant::S2, base);
  EXPECT_EQ(s2.agents, 1);
  EXPECT_FALSE(s2.use_encoder);
  EXPECT_FALSE(s2.use_conv_merge);
  EXPECT_FALSE(s2.use_time_action);
  const RunConfig s3 = configure_ablation(Variant::S3, base);
  EXPECT_TRUE(s3.use_encoder);
  EXPECT_FALSE(s3.use_conv_merge);
  const RunConfig s4 = configure_ablation(Variant::S4, base);
  EXPECT_TRUE(s4.use_conv_merge);
  EXPECT_FALSE(s4.use_time_action);
  const RunConfig s5 = configure_ablation(Variant::S5, base);
  EXPECT_EQ(s5.agents, 1);
  EXPECT_TRUE(s5.use_time_action);
  const RunConfig s6 = configure_ablation(Variant::S6, base);
  EXPECT_EQ(config_to_text(s6), config_to_text(base));
  EXPECT_EQ(configure_ablation(Variant::S1, base).variant, Variant::S1);
}

struct Recount {
  std::map<std::tuple<int, int, int>, double> cells;  // (class or -1, agent, row * P + col)
};

// Reads the trajectory CSV and recounts cells without the library's counter.
Recount recount(const std::string& path, Index K, Index P) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "episode,step,agent,label,t,l");
  Recount r;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> f;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const int agent = std::stoi(f[2]);
    const int label = std::stoi(f[3]);
    const double t = std::stod(f[4]), l = std::stod(f[5]);
    const Index row = std::clamp<Index>(std::llround((t + 1.0) / 2.0 * static_cast<double>(K - 1)), 0, K - 1);
    const Index col = std::clamp<Index>(std::llround((l + 1.0) / 2.0 * static_cast<double>(P - 1)), 0, P - 1);
    const int flat = static_cast<int>(row * P + col);
    r.cells[{-1, agent, flat}] += 1.0;
    r.cells[{label, agent, flat}] += 1.0;
  }
  return r;
}

TEST(Heatmap, CountsEqualIndependentRecount) {
  const RunConfig cfg = small_config();
  ModelParams p = make_model_params(cfg);
  init_model_params(p, 4);
  const Dataset ds = small_dataset(2);
  const auto ws = make_windows(ds, cfg.window_length, cfg.overlap);
  const auto trajs = rollout_windows(p, ws, 3);
  ASSERT_EQ(trajs.size(), ws.size() * 3);
  const std::string path = (fs::temp_directory_path() / "star_test_traj.csv").string();
  write_trajectories_csv(trajs, path);
  const HeatmapSet set = count_selections(trajs, 20, 24, 3, 4);
  const Recount r = recount(path, 20, 24);

  double total = 0.0;
  for (int a = 0; a < 3; ++a) {
    const Matrix& agg = set.aggregate[static_cast<std::size_t>(a)];
    total += agg.sum();
    for (Index i = 0; i < 20; ++i)
      for (Index j = 0; j < 24; ++j) {
        const int flat = static_cast<int>(i * 24 + j);
        const auto it = r.cells.find({-1, a, flat});
        EXPECT_EQ(agg(i, j), it == r.cells.end() ? 0.0 : it->second);
        for (int c = 0; c < 4; ++c) {
          const auto ic = r.cells.find({c, a, flat});
          EXPECT_EQ(set.per_class[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)](i, j),
                    ic == r.cells.end() ? 0.0 : ic->second);
        }
      }
  }
  EXPECT_EQ(total, static_cast<double>(trajs.size() * 6 * 3));

  const HeatmapSet direct = heatmap(p, ws, 3);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(direct.aggregate[static_cast<std::size_t>(a)], set.aggregate[static_cast<std::size_t>(a)]);
  EXPECT_NEAR(HeatmapSet::normalized(set.aggregate[0]).sum(), 1.0, 1e-12);
  EXPECT_THROW(heatmap(p, ws, 0), ConfigError);
}

TEST(Heatmap, WritesKByPFiles) {
  const RunConfig cfg = small_config();
  ModelParams p = make_model_params(cfg);
  init_model_params(p, 5);
  const auto ws = make_windows(small_dataset(3), cfg.window_length, cfg.overlap);
  const fs::path dir = fs::temp_directory_path() / "star_test_heatmaps";
  fs::remove_all(dir);
  write_heatmaps(heatmap(p, ws, 1), dir.string());
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    ++files;
    std::ifstream in(entry.path());
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      EXPECT_EQ(std::count(line.begin(), line.end(), ','), 23);
    }
    EXPECT_EQ(rows, 20);
  }
  EXPECT_EQ(files, 3 * 2 + 4 * 3 * 2);
}

TEST(Evaluate, UsesStoredStatsAndChecksShape) {
  RunConfig cfg = small_config();
  const Dataset ds = small_dataset(4);
  Checkpoint ck;
  RunResult r = run_fold(ds, cfg, 2, &ck);
  ASSERT_TRUE(ck.stats.has_value());
  EXPECT_EQ(r.report.total, 16);
  const MetricsReport again = evaluate(ck, loso_split(ds, 2).second);
  EXPECT_EQ(again.confusion, r.report.confusion);

  SynthConfig other = SynthConfig::defaults();
  other.channels = 12;
  other.channel_bands = {{0, 3}, {3, 6}, {6, 9}, {9, 12}};
  EXPECT_THROW(evaluate(ck, synth_generate(other, 1)), ConfigError);
}

TEST(Training, EpochLogAndDeterminism) {
  RunConfig cfg = small_config();
  cfg.epochs = 2;
  const auto ws = make_windows(small_dataset(5), cfg.window_length, cfg.overlap);
  std::vector<EpochLog> logs;
  const ModelParams a = train_model(cfg, ws, [&](const EpochLog& e) { logs.push_back(e); });
  ASSERT_EQ(logs.size(), 2u);
  EXPECT_EQ(logs[1].epoch, 1);
  cfg.workers = 3;
  cfg.shard_windows = 2;
  RunConfig cfg2 = cfg;
  const ModelParams b = train_model(cfg, ws);
  cfg2.workers = 1;
  const ModelParams c = train_model(cfg2, ws);
  for (std::size_t g = 0; g < b.groups.size(); ++g) EXPECT_EQ(b.groups[g].weight, c.groups[g].weight);
}

TEST(CnnBaseline, GradientsMatchFiniteDifferences) {
  CnnBaseline net = make_cnn_baseline(8, 8, 3, 2);
  Rng rng = make_stream(6, {});
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Window> ws(3);
  for (int i = 0; i < 3; ++i) {
    ws[static_cast<std::size_t>(i)].values.resize(8, 8);
    for (Index k = 0; k < 64; ++k) ws[static_cast<std::size_t>(i)].values.data()[k] = n(rng);
    ws[static_cast<std::size_t>(i)].label = i;
  }
  const Window* batch[] = {&ws[0], &ws[1], &ws[2]};
  auto f = [&](bool grad) {
    if (grad) return cnn_accumulate_gradients(net, batch);
    double loss = 0.0;
    for (const Window* w : batch) loss -= std::log(cnn_predict(net, w->values)(w->label));
    return loss / 3.0;
  };
  const auto groups = net.pointers();
  EXPECT_LT(grad_check(f, groups, 1e-6).max_relative_error, 1e-6);
}

TEST(CnnBaseline, LearnsTheSyntheticTask) {
  RunConfig cfg;
  cfg.variant = Variant::S1;
  cfg.channels = 24;
  cfg.classes = 4;
  cfg.epochs = 8;
  cfg.batch_size = 8;
  const RunResult r = run_fold(synth_generate(SynthConfig::defaults(), 6), cfg, 0);
  EXPECT_GE(r.report.accuracy, 0.9);
}

TEST(Summary, PopulationStatistics) {
  const double v[] = {1.0, 2.0, 3.0, 4.0};
  const Summary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(1.25));
  EXPECT_EQ(summarize({}).mean, 0.0);
}

TEST(GradientGate, TinyConfigShape) {
  const RunConfig cfg = tiny_gradcheck_config();
  EXPECT_EQ(cfg.window_length, 8);
  EXPECT_EQ(cfg.channels, 6);
  EXPECT_EQ(cfg.agents, 2);
  EXPECT_EQ(cfg.episode_length, 3);
  EXPECT_EQ(cfg.copies, 1);
  EXPECT_EQ(cfg.variance, 0.0);
}

}  // namespace
}  // namespace star
