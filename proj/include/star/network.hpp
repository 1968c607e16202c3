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

// The multi-agent attention model: per-agent glimpse encoders, a 1 x M
// convolutional merge of the shared observation, an LSTM core, Gaussian
// location/time policies and a softmax classifier, plus the training step
// that combines cross-entropy with REINFORCE.
//
// Rollouts are column-batched: column k of every matrix belongs to one
// episode. Agent-indexed activations use agent-major blocks, i.e. agent a of
// an n-column rollout occupies columns [a*n, (a+1)*n).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "star/config.hpp"
#include "star/glimpse.hpp"
#include "star/numerics.hpp"
#include "star/policy.hpp"
#include "star/rng.hpp"

namespace star {

struct ModelLayout {
  std::vector<int> enc_glimpse;  // one entry when encoders are shared, else one per agent
  std::vector<int> enc_loc;
  std::vector<int> enc_out;
  int conv = -1;
  int core = -1;
  std::vector<int> loc_heads;
  int time_head = -1;
  int classifier = -1;
};

struct ModelParams {
  RunConfig config;
  std::vector<ParamGroup> groups;
  ModelLayout layout;

  ParamGroup& at(int index) { return groups.at(static_cast<std::size_t>(index)); }
  const ParamGroup& at(int index) const { return groups.at(static_cast<std::size_t>(index)); }
  int find(const std::string& name) const;  // -1 when absent
  std::vector<ParamGroup*> pointers();
  void zero_grad();
  Index size() const;
};

Index observation_width(const RunConfig& cfg);  // o_i width (raw glimpse when the encoder is off)
Index merge_width(const RunConfig& cfg);        // r_g width fed to the core

// All groups with the right shapes and zero values.
ModelParams make_model_params(const RunConfig& cfg);
// Glorot weights, zero biases, LSTM forget bias 1. Deterministic in `seed`.
void init_model_params(ModelParams& params, std::uint64_t seed);

// ---- single-episode building blocks ----------------------------------------

// relu(L_o(relu(L_e(glimpse)) + relu(L_tl([t, l])))). With the encoder
// disabled the raw glimpse passes through.
Vector encode_observation(const ModelParams& params, int agent, const Vector& glimpse,
                          NormalizedLocation loc);

struct SharedObservation {
  Matrix stacked;  // H x observation width, row i = o_i
  Matrix conv_out; // H x conv_filters
  Vector merged;   // r_g, row-major flatten of conv_out (or of stacked without the merge)
};

SharedObservation merge_observations(const ModelParams& params, const std::vector<Vector>& observations);

LstmState core_step(const ModelParams& params, const Vector& merged, const LstmState& state);

struct ProposedActions {
  std::vector<SampledAction> locations;
  std::optional<SampledAction> time;
};

// Location head i sees [h; o_i]; the time head sees h alone.
ProposedActions propose_actions(const ModelParams& params, const Vector& hidden,
                                const std::vector<Vector>& observations, Rng& rng);

Vector classify(const ModelParams& params, const Vector& hidden);

// ---- batched rollout ---------------------------------------------------------

class Rollout {
 public:
  // Runs S steps for every column. `rngs` has one stream per column.
  // `replay`, when non-empty, holds one trajectory per column whose initial
  // locations and pre-clamp action draws are reused instead of sampling.
  Rollout(const ModelParams& params, std::vector<const Window*> windows, std::span<Rng> rngs,
          std::span<const Trajectory* const> replay = {});

  Index columns() const { return n_; }
  const Matrix& final_probs() const { return steps_.back().probs; }
  const Matrix& step_probs(int step) const { return steps_.at(static_cast<std::size_t>(step)).probs; }
  int prediction(Index column) const;

  Trajectory trajectory(Index column, bool keep_policy_inputs = false) const;

  // Sum of the log-densities of every sampled action of one column.
  double log_density_sum(Index column) const;

  // Backpropagates final-step logit gradients (C x n) and optional per-step
  // logit gradients through the classifier, core, merge and encoders.
  // `grads` must hold the same weights the rollout ran with.
  void backward(ModelParams& grads, const Matrix& d_final_logits,
                const std::vector<Matrix>* d_step_logits = nullptr) const;

  // Adds column_weights[k] * grad log-density of every action of column k
  // into the policy heads.
  void accumulate_policy_scores(ModelParams& grads, std::span<const double> column_weights) const;

 private:
  struct Step {
    Matrix t;             // 1 x n, observed time location
    Matrix l;             // H x n, observed modality locations
    Matrix glimpses;      // G x H*n
    Matrix loc_inputs;    // 2 x H*n
    Matrix enc_glimpse;   // post-relu
    Matrix enc_loc;       // post-relu
    Matrix obs;           // observation width x H*n
    Matrix conv_in_out;   // F x H*n (merge on)
    Matrix merged;        // r_g, merge width x n
    LstmCache core;
    Matrix hidden;
    Matrix logits;
    Matrix probs;
    std::vector<Matrix> head_inputs;  // per agent, (core + obs width) x n
    Matrix loc_mean, loc_sample, loc_logp;  // H x n
    Matrix time_mean, time_sample, time_logp;  // 1 x n
  };

  const ModelParams* params_;
  std::vector<const Window*> windows_;
  Index n_ = 0;
  std::vector<Step> steps_;
};

// One episode (column 0 of a one-column rollout).
Trajectory rollout_episode(const Window& w, const ModelParams& params, Rng& rng);

struct McPrediction {
  Vector prediction;  // mean of the copies' final-step probabilities
  std::vector<Trajectory> trajectories;
};

// M rollouts with independent streams derived from `rng`.
McPrediction monte_carlo_predict(const Window& w, const ModelParams& params, Rng& rng);

// Monte-Carlo predictions for many windows (C x N). Streams are keyed by
// (seed, key, window index, copy), so results do not depend on `workers`.
Matrix predict_windows(const ModelParams& params, std::span<const Window> windows, std::uint64_t key,
                       std::vector<std::vector<Trajectory>>* trajectories = nullptr);

// ---- training ----------------------------------------------------------------

struct TrainStats {
  double loss = 0.0;
  double mean_reward = 0.0;
  double grad_norm = 0.0;
};

class Trainer {
 public:
  explicit Trainer(ModelParams& params);

  // One optimizer step on `batch`. Streams are keyed by (seed, step_key,
  // position in batch, copy). Gradients are reduced shard by shard in a
  // fixed order, so the update is bitwise independent of the worker count.
  TrainStats train_step(std::span<const Window* const> batch, std::uint64_t step_key);

  // Cross-entropy and REINFORCE gradients for `batch` into params' buffers
  // without updating. Used by train_step and by the gradient checks.
  TrainStats accumulate_gradients(std::span<const Window* const> batch, std::uint64_t step_key,
                                  std::span<const Trajectory* const> replay = {});

  double baseline() const { return baseline_; }

 private:
  ModelParams* params_;
  double baseline_ = 0.0;
};

}  // namespace star
