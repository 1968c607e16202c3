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

#include <random>

#include "star/errors.hpp"
#include "star/experiment.hpp"
#include "star/network.hpp"

namespace star {
namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.window_length = 20;
  cfg.channels = 24;
  cfg.classes = 4;
  cfg.episode_length = 5;
  cfg.copies = 2;
  cfg.enc_glimpse_width = 16;
  cfg.enc_loc_width = 16;
  cfg.enc_out_width = 20;
  cfg.conv_filters = 6;
  cfg.core_width = 12;
  return cfg;
}

std::vector<Window> random_windows(const RunConfig& cfg, int n, std::uint64_t seed) {
  Rng rng = make_stream(seed, {77});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Window> ws(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Window& w = ws[static_cast<std::size_t>(i)];
    w.values.resize(cfg.window_length, cfg.channels);
    for (Index k = 0; k < w.values.size(); ++k) w.values.data()[k] = normal(rng);
    w.label = i % cfg.classes;
  }
  return ws;
}

ModelParams initialized(const RunConfig& cfg, std::uint64_t seed = 3) {
  ModelParams p = make_model_params(cfg);
  init_model_params(p, seed);
  return p;
}

void expect_shape(const ModelParams& p, const std::string& name, Index rows, Index cols) {
  const int i = p.find(name);
  ASSERT_GE(i, 0) << name;
  EXPECT_EQ(p.at(i).rows(), rows) << name;
  EXPECT_EQ(p.at(i).cols(), cols) << name;
  EXPECT_EQ(p.at(i).bias.size(), rows) << name;
}

TEST(Network, FullModelShapesAtDefaultWidths) {
  RunConfig cfg;
  cfg.channels = 24;
  cfg.classes = 4;
  const ModelParams p = make_model_params(cfg);
  expect_shape(p, "enc_glimpse", 128, 27);
  expect_shape(p, "enc_loc", 128, 2);
  expect_shape(p, "enc_out", 220, 128);
  expect_shape(p, "conv", 40, 220);
  expect_shape(p, "core", 4 * 220, 3 * 40 + 220);
  for (int a = 0; a < 3; ++a) expect_shape(p, "loc_head_" + std::to_string(a), 1, 440);
  expect_shape(p, "time_head", 1, 220);
  expect_shape(p, "classifier", 4, 220);
  EXPECT_EQ(observation_width(cfg), 220);
  EXPECT_EQ(merge_width(cfg), 120);
}

TEST(Network, AblationShapes) {
  RunConfig base;
  base.channels = 24;
  base.classes = 4;
  const ModelParams s2 = make_model_params(configure_ablation(Variant::S2, base));
  EXPECT_EQ(s2.find("enc_glimpse"), -1);
  EXPECT_EQ(s2.find("conv"), -1);
  EXPECT_EQ(s2.find("time_head"), -1);
  expect_shape(s2, "core", 880, 27 + 220);
  expect_shape(s2, "loc_head_0", 1, 220 + 27);
  const ModelParams s3 = make_model_params(configure_ablation(Variant::S3, base));
  expect_shape(s3, "core", 880, 220 + 220);
  EXPECT_EQ(s3.find("conv"), -1);
  const ModelParams s4 = make_model_params(configure_ablation(Variant::S4, base));
  expect_shape(s4, "core", 880, 40 + 220);
  EXPECT_EQ(s4.find("time_head"), -1);
  const ModelParams s5 = make_model_params(configure_ablation(Variant::S5, base));
  expect_shape(s5, "time_head", 1, 220);
  EXPECT_EQ(s5.find("loc_head_1"), -1);
}

TEST(Network, PerAgentEncoders) {
  RunConfig cfg = small_config();
  cfg.per_agent_encoders = true;
  const ModelParams p = make_model_params(cfg);
  for (int a = 0; a < 3; ++a) EXPECT_GE(p.find("enc_out_" + std::to_string(a)), 0);
  cfg.enc_loc_width = 5;
  EXPECT_THROW(make_model_params(cfg), ConfigError);
}

TEST(Network, InitIsDeterministicAndSeedDependent) {
  const RunConfig cfg = small_config();
  const ModelParams a = initialized(cfg, 9), b = initialized(cfg, 9), c = initialized(cfg, 10);
  for (std::size_t g = 0; g < a.groups.size(); ++g) EXPECT_EQ(a.groups[g].weight, b.groups[g].weight);
  EXPECT_NE(a.at(a.layout.core).weight, c.at(c.layout.core).weight);
}

TEST(Rollout, ProbabilitiesAndTrajectories) {
  const RunConfig cfg = small_config();
  const ModelParams p = initialized(cfg);
  const auto ws = random_windows(cfg, 3, 1);
  std::vector<Rng> rngs;
  for (int k = 0; k < 3; ++k) rngs.push_back(make_stream(1, {static_cast<std::uint64_t>(k)}));
  Rollout r(p, {&ws[0], &ws[1], &ws[2]}, rngs);
  ASSERT_EQ(r.final_probs().rows(), 4);
  for (Index k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.final_probs().col(k).sum(), 1.0, 1e-12);
    const Trajectory t = r.trajectory(k);
    EXPECT_TRUE(t.complete());
    EXPECT_EQ(t.label, ws[static_cast<std::size_t>(k)].label);
    for (const StepRecord& s : t.steps) {
      ASSERT_EQ(s.observed.size(), 3u);
      ASSERT_TRUE(s.time_action.has_value());
      for (const NormalizedLocation& o : s.observed) {
        EXPECT_GE(o.t, -1.0);
        EXPECT_LE(o.t, 1.0);
        EXPECT_GE(o.l, -1.0);
        EXPECT_LE(o.l, 1.0);
      }
    }
  }
}

TEST(Rollout, RejectsMismatchedWindowsAndStreams) {
  const RunConfig cfg = small_config();
  const ModelParams p = initialized(cfg);
  Window w;
  w.values = Matrix::Zero(10, 24);
  std::vector<Rng> one{make_stream(1, {})};
  EXPECT_THROW(Rollout(p, {&w}, one), DimensionError);
  const auto ws = random_windows(cfg, 2, 1);
  EXPECT_THROW(Rollout(p, {&ws[0], &ws[1]}, one), DimensionError);
}

TEST(Rollout, FrozenTimeWithoutTimeAction) {
  RunConfig cfg = configure_ablation(Variant::S4, small_config());
  const ModelParams p = initialized(cfg);
  const auto ws = random_windows(cfg, 1, 2);
  std::vector<Rng> rngs{make_stream(4, {})};
  const Trajectory t = Rollout(p, {&ws[0]}, rngs).trajectory(0);
  for (const StepRecord& s : t.steps) {
    EXPECT_FALSE(s.time_action.has_value());
    EXPECT_EQ(s.observed[0].t, t.steps[0].observed[0].t);
  }
}

// The batched rollout must agree with the per-item building blocks.
TEST(Rollout, MatchesSingleItemReference) {
  RunConfig cfg = small_config();
  cfg.variance = 0.0;
  const ModelParams p = initialized(cfg, 5);
  const auto ws = random_windows(cfg, 2, 3);
  std::vector<Rng> rngs{make_stream(8, {0}), make_stream(8, {1})};
  Rollout r(p, {&ws[0], &ws[1]}, rngs);
  const GlimpseGeometry geom = cfg.glimpse_geometry();
  for (Index k = 0; k < 2; ++k) {
    const Trajectory traj = r.trajectory(k);
    const Window& w = ws[static_cast<std::size_t>(k)];
    LstmState state = LstmState::zeros(cfg.core_width, 1);
    Vector probs;
    for (int s = 0; s < cfg.episode_length; ++s) {
      const StepRecord& rec = traj.steps[static_cast<std::size_t>(s)];
      std::vector<Vector> obs;
      for (int a = 0; a < cfg.agents; ++a) {
        const NormalizedLocation loc = rec.observed[static_cast<std::size_t>(a)];
        obs.push_back(encode_observation(p, a, foveate(w.values, loc, geom).flatten(), loc));
      }
      const SharedObservation shared = merge_observations(p, obs);
      state = core_step(p, shared.merged, state);
      probs = classify(p, state.hidden.col(0));
      EXPECT_LT((probs - rec.prediction).cwiseAbs().maxCoeff(), 1e-12);
      Rng unused = make_stream(0, {});
      const ProposedActions next = propose_actions(p, state.hidden.col(0), obs, unused);
      if (s + 1 < cfg.episode_length) {
        const StepRecord& after = traj.steps[static_cast<std::size_t>(s + 1)];
        EXPECT_NEAR(after.observed[0].l, next.locations[0].value, 1e-12);
        EXPECT_NEAR(after.observed[0].t, next.time->value, 1e-12);
      }
    }
    EXPECT_LT((probs - r.final_probs().col(k)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rollout, ReplayReproducesTheRecordedEpisode) {
  const RunConfig cfg = small_config();
  const ModelParams p = initialized(cfg);
  const auto ws = random_windows(cfg, 2, 5);
  std::vector<Rng> rngs{make_stream(1, {0}), make_stream(1, {1})};
  Rollout first(p, {&ws[0], &ws[1]}, rngs);
  const Trajectory t0 = first.trajectory(0), t1 = first.trajectory(1);
  const Trajectory* replay[] = {&t0, &t1};
  std::vector<Rng> other{make_stream(99, {0}), make_stream(99, {1})};
  Rollout again(p, {&ws[0], &ws[1]}, other, replay);
  EXPECT_EQ(again.final_probs(), first.final_probs());
  EXPECT_EQ(again.log_density_sum(1), first.log_density_sum(1));
}

TEST(Gradient, TinyModelMatchesFiniteDifferences) {
  const GradCheckResult r = check_model_gradient(tiny_gradcheck_config(), 1);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_group << "[" << r.worst_index << "]";
  EXPECT_GT(r.coordinates, 500u);
}

TEST(Gradient, AblationsAndEncoderVariants) {
  for (Variant v : {Variant::S2, Variant::S3, Variant::S4, Variant::S5}) {
    const RunConfig cfg = configure_ablation(v, tiny_gradcheck_config());
    const GradCheckResult r = check_model_gradient(cfg, 2);
    EXPECT_LT(r.max_relative_error, 1e-4) << to_string(v) << " " << r.worst_group;
  }
  RunConfig cfg = tiny_gradcheck_config();
  cfg.per_agent_encoders = true;
  cfg.copies = 3;
  EXPECT_LT(check_model_gradient(cfg, 3).max_relative_error, 1e-4);
}

TEST(Gradient, SampledCoordinatesAtDefaultWidths) {
  RunConfig cfg;
  cfg.channels = 24;
  cfg.classes = 4;
  cfg.episode_length = 3;
  cfg.copies = 2;
  cfg.variance = 0.0;
  const GradCheckResult r = check_model_gradient(cfg, 4, 2, 1e-5, 40);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_group << "[" << r.worst_index << "]";
}

// With frozen draws the score gradient of every head equals the gradient of
// the summed log-density with respect to that head.
TEST(Gradient, PolicyScoresMatchLogDensityDifferences) {
  RunConfig cfg = small_config();
  cfg.variance = 0.22;
  cfg.time_variance = 0.1;
  ModelParams p = initialized(cfg, 6);
  const auto ws = random_windows(cfg, 3, 6);
  std::vector<const Window*> cols{&ws[0], &ws[1], &ws[2]};
  const std::vector<double> weights{0.5, -1.0, 2.0};
  auto streams = [] {
    return std::vector<Rng>{make_stream(2, {0}), make_stream(2, {1}), make_stream(2, {2})};
  };
  std::vector<Trajectory> rec;
  {
    auto s = streams();
    Rollout r(p, cols, s);
    for (Index k = 0; k < 3; ++k) rec.push_back(r.trajectory(k));
  }
  const Trajectory* replay[] = {&rec[0], &rec[1], &rec[2]};
  std::vector<ParamGroup*> heads;
  for (int i : p.layout.loc_heads) heads.push_back(&p.at(i));
  heads.push_back(&p.at(p.layout.time_head));
  auto f = [&](bool grad) {
    auto s = streams();
    Rollout r(p, cols, s, replay);
    if (grad) r.accumulate_policy_scores(p, weights);
    double total = 0.0;
    for (Index k = 0; k < 3; ++k) total += weights[static_cast<std::size_t>(k)] * r.log_density_sum(k);
    return total;
  };
  EXPECT_LT(grad_check(f, heads, 1e-5).max_relative_error, 1e-6);
}

TEST(Gradient, ScoresOfKeptTrajectoriesMatchRolloutScores) {
  RunConfig cfg = small_config();
  ModelParams p = initialized(cfg, 7);
  const auto ws = random_windows(cfg, 1, 7);
  std::vector<Rng> rngs{make_stream(3, {})};
  Rollout r(p, {&ws[0]}, rngs);
  ModelParams a = p, b = p;
  a.zero_grad();
  b.zero_grad();
  const double w[] = {1.0};
  r.accumulate_policy_scores(a, w);
  const Trajectory t = r.trajectory(0, true);
  std::vector<ParamGroup*> heads;
  for (int i : b.layout.loc_heads) heads.push_back(&b.at(i));
  reinforce_contribution(t, Reward{1}, 0.0, heads, &b.at(b.layout.time_head), cfg.variance,
                         cfg.effective_time_variance(), 1.0);
  for (int i : p.layout.loc_heads) {
    EXPECT_LT((a.at(i).grad_weight - b.at(i).grad_weight).cwiseAbs().maxCoeff(), 1e-10);
  }
  const int th = p.layout.time_head;
  EXPECT_LT((a.at(th).grad_weight - b.at(th).grad_weight).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Trainer, WorkerCountDoesNotChangeGradients) {
  RunConfig cfg = small_config();
  cfg.shard_windows = 2;
  const auto ws = random_windows(cfg, 7, 8);
  std::vector<const Window*> batch;
  for (const Window& w : ws) batch.push_back(&w);
  ModelParams one = initialized(cfg, 8);
  ModelParams many = one;
  many.config.workers = 3;
  Trainer(one).accumulate_gradients(batch, 5);
  Trainer(many).accumulate_gradients(batch, 5);
  for (std::size_t g = 0; g < one.groups.size(); ++g) {
    EXPECT_EQ(one.groups[g].grad_weight, many.groups[g].grad_weight) << one.groups[g].name;
    EXPECT_EQ(one.groups[g].grad_bias, many.groups[g].grad_bias) << one.groups[g].name;
  }
}

TEST(Trainer, StepChangesParametersAndReportsStats) {
  RunConfig cfg = small_config();
  cfg.use_baseline = true;
  const auto ws = random_windows(cfg, 4, 9);
  std::vector<const Window*> batch;
  for (const Window& w : ws) batch.push_back(&w);
  ModelParams p = initialized(cfg, 9);
  const Matrix before = p.at(p.layout.classifier).weight;
  Trainer t(p);
  const TrainStats s = t.train_step(batch, 0);
  EXPECT_GT(s.loss, 0.0);
  EXPECT_GE(s.mean_reward, 0.0);
  EXPECT_LE(s.mean_reward, 1.0);
  EXPECT_NE(before, p.at(p.layout.classifier).weight);
  EXPECT_NEAR(t.baseline(), 0.1 * s.mean_reward, 1e-12);
  EXPECT_THROW(t.train_step({}, 1), StateError);
}

TEST(Prediction, WorkerCountDoesNotChangePredictions) {
  RunConfig cfg = small_config();
  cfg.shard_windows = 1;
  const auto ws = random_windows(cfg, 5, 10);
  ModelParams p = initialized(cfg, 10);
  const Matrix a = predict_windows(p, ws, 3);
  p.config.workers = 4;
  const Matrix b = predict_windows(p, ws, 3);
  EXPECT_EQ(a, b);
  for (Index k = 0; k < a.cols(); ++k) EXPECT_NEAR(a.col(k).sum(), 1.0, 1e-12);
}

TEST(Prediction, MonteCarloIsTheMeanOfCopies) {
  RunConfig cfg = small_config();
  cfg.copies = 4;
  const ModelParams p = initialized(cfg, 11);
  const auto ws = random_windows(cfg, 1, 11);
  Rng rng = make_stream(5, {});
  const McPrediction mc = monte_carlo_predict(ws[0], p, rng);
  ASSERT_EQ(mc.trajectories.size(), 4u);
  Vector mean = Vector::Zero(4);
  for (const Trajectory& t : mc.trajectories) mean += t.steps.back().prediction / 4.0;
  EXPECT_LT((mean - mc.prediction).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace star
