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

// Plain convolutional baseline without any selection mechanism:
//
//   K x P input
//   -> conv 3x3, 8 maps, zero "same" padding, ReLU, 2x2 max-pool
//   -> conv 3x3, 16 maps, zero "same" padding, ReLU, 2x2 max-pool
//   -> flatten -> linear -> softmax
//
// Pooling floors odd extents. Trained by cross-entropy with plain SGD.

#include <cstdint>
#include <vector>

#include "star/config.hpp"
#include "star/glimpse.hpp"
#include "star/metrics.hpp"
#include "star/numerics.hpp"

namespace star {

struct CnnBaseline {
  Index rows = 0;
  Index cols = 0;
  int classes = 0;
  ParamGroup conv1;  // 8 x 9
  ParamGroup conv2;  // 16 x 72
  ParamGroup head;   // C x 16 * (rows/4) * (cols/4)

  std::vector<ParamGroup*> pointers() { return {&conv1, &conv2, &head}; }
};

CnnBaseline make_cnn_baseline(Index rows, Index cols, int classes, std::uint64_t seed);

// Class probabilities for one window.
Vector cnn_predict(const CnnBaseline& net, const Matrix& input);

// Mean cross-entropy over `batch`; gradients accumulate into the groups.
double cnn_accumulate_gradients(CnnBaseline& net, std::span<const Window* const> batch);

// Trains for cfg.epochs with cfg.batch_size / cfg.learning_rate / cfg.seed
// and reports test metrics.
MetricsReport cnn_baseline_train_eval(const std::vector<Window>& train, const std::vector<Window>& test,
                                      const RunConfig& cfg);

}  // namespace star
