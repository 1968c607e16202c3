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

// Gaussian selection policies and the REINFORCE estimator.
//
// A policy head is a ParamGroup with one output row. Its mean is
// tanh(w . input + b); actions are drawn from N(mean, variance) and clamped
// to [-1, 1]. Log-densities are always evaluated at the pre-clamp draw.

#include <optional>
#include <span>
#include <vector>

#include "star/glimpse.hpp"
#include "star/numerics.hpp"
#include "star/rng.hpp"

namespace star {

struct GaussianPolicyHead {
  ParamGroup params;  // 1 x input
  double variance = 0.22;
};

struct SampledAction {
  double value = 0.0;  // clamped to [-1, 1]
  double mean = 0.0;
  double sample = 0.0;  // pre-clamp draw
  double log_density = 0.0;
};

struct Reward {
  int value = 0;
};

struct StepRecord {
  std::vector<NormalizedLocation> observed;  // where each agent looked at this step
  std::vector<SampledAction> location_actions;
  std::optional<SampledAction> time_action;
  Vector prediction;
  // Policy-head inputs, only filled when a rollout is asked to keep them.
  std::vector<Vector> location_inputs;
  Vector time_input;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  int expected_steps = 0;
  int label = 0;
  int prediction = -1;
  Reward reward;

  bool complete() const { return expected_steps > 0 && static_cast<int>(steps.size()) == expected_steps; }
};

// -0.5 ln(2 pi variance) - (x - mean)^2 / (2 variance). DomainError if variance <= 0.
double gaussian_log_pdf(double x, double mean, double variance);
double gaussian_log_pdf_dmean(double x, double mean, double variance);

// Draws from `mean` with the given variance. variance == 0 is a test mode:
// the action equals the mean and log_density is reported as 0.
SampledAction sample_from_mean(double mean, double variance, Rng& rng);
SampledAction sample_action(const GaussianPolicyHead& head, const Vector& input, Rng& rng);

Reward terminal_reward(int prediction, int label);

// For each column k adds column_weights[k] * d/dtheta log N(samples[k];
// tanh(theta . inputs.col(k)), variance) to the head gradients. A zero
// variance contributes nothing.
void accumulate_score_gradient(ParamGroup& head, const Matrix& inputs, std::span<const double> samples,
                               std::span<const double> means, double variance,
                               std::span<const double> column_weights);

// Adds weight * (reward - baseline) * sum over steps and actions of
// grad log-density into the head gradients. The trajectory must be complete
// and carry its policy inputs. `time_head` may be null when the trajectory
// has no time actions.
void reinforce_contribution(const Trajectory& traj, Reward reward, double baseline,
                            std::span<ParamGroup* const> location_heads, ParamGroup* time_head,
                            double location_variance, double time_variance, double weight);

}  // namespace star
