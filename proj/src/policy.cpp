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

#include "star/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "star/errors.hpp"

namespace star {

double gaussian_log_pdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("gaussian_log_pdf: variance must be > 0");
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

double gaussian_log_pdf_dmean(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("gaussian_log_pdf_dmean: variance must be > 0");
  return (x - mean) / variance;
}

SampledAction sample_from_mean(double mean, double variance, Rng& rng) {
  if (variance < 0.0) throw DomainError("sample_from_mean: negative variance");
  SampledAction a;
  a.mean = mean;
  if (variance == 0.0) {
    a.sample = mean;
  } else {
    std::normal_distribution<double> dist(mean, std::sqrt(variance));
    a.sample = dist(rng);
    a.log_density = gaussian_log_pdf(a.sample, mean, variance);
  }
  a.value = std::clamp(a.sample, -1.0, 1.0);
  return a;
}

SampledAction sample_action(const GaussianPolicyHead& head, const Vector& input, Rng& rng) {
  if (head.params.rows() != 1) throw DimensionError("sample_action: head must have one output");
  const double mean = std::tanh(linear_forward(head.params, input)(0));
  return sample_from_mean(mean, head.variance, rng);
}

Reward terminal_reward(int prediction, int label) { return {prediction == label ? 1 : 0}; }

void accumulate_score_gradient(ParamGroup& head, const Matrix& inputs, std::span<const double> samples,
                               std::span<const double> means, double variance,
                               std::span<const double> column_weights) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (samples.size() != n || means.size() != n || column_weights.size() != n ||
      inputs.rows() != head.cols() || head.rows() != 1) {
    throw DimensionError("accumulate_score_gradient: " + head.name + " inconsistent batch");
  }
  if (variance == 0.0) return;
  Matrix dz(1, inputs.cols());
  for (std::size_t k = 0; k < n; ++k) {
    const double m = means[k];
    dz(0, static_cast<Index>(k)) =
        column_weights[k] * gaussian_log_pdf_dmean(samples[k], m, variance) * (1.0 - m * m);
  }
  linear_backward_params(head, inputs, dz);
}

void reinforce_contribution(const Trajectory& traj, Reward reward, double baseline,
                            std::span<ParamGroup* const> location_heads, ParamGroup* time_head,
                            double location_variance, double time_variance, double weight) {
  if (!traj.complete()) {
    throw StateError("reinforce_contribution: trajectory has " + std::to_string(traj.steps.size()) +
                     " of " + std::to_string(traj.expected_steps) + " steps");
  }
  const double advantage = weight * (static_cast<double>(reward.value) - baseline);
  const double w[1] = {advantage};
  for (const StepRecord& step : traj.steps) {
    if (step.location_actions.size() != location_heads.size() ||
        step.location_inputs.size() != location_heads.size()) {
      throw StateError("reinforce_contribution: step lacks per-agent actions or policy inputs");
    }
    for (std::size_t a = 0; a < location_heads.size(); ++a) {
      const SampledAction& act = step.location_actions[a];
      const double s[1] = {act.sample};
      const double m[1] = {act.mean};
      accumulate_score_gradient(*location_heads[a], step.location_inputs[a], s, m, location_variance, w);
    }
    if (step.time_action) {
      if (time_head == nullptr || step.time_input.size() == 0) {
        throw StateError("reinforce_contribution: time action without head or input");
      }
      const double s[1] = {step.time_action->sample};
      const double m[1] = {step.time_action->mean};
      accumulate_score_gradient(*time_head, step.time_input, s, m, time_variance, w);
    }
  }
}

}  // namespace star
