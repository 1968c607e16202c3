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
#include <span>
#include <string>
#include <vector>

namespace star {

// Confusion counts are row-major C x C with rows = true class, columns =
// predicted class. Precision/recall/F1 are macro averages; a 0/0 ratio
// counts as 0.
struct MetricsReport {
  int classes = 0;
  std::vector<std::int64_t> confusion;
  std::int64_t total = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<double> class_precision;
  std::vector<double> class_recall;
  std::vector<double> class_f1;

  std::int64_t count(int truth, int predicted) const {
    return confusion[static_cast<std::size_t>(truth * classes + predicted)];
  }
};

MetricsReport compute_metrics(int classes, std::vector<std::int64_t> confusion);
MetricsReport compute_metrics(int classes, std::span<const int> labels, std::span<const int> predictions);

// One `key=value` line per metric, then `confusion=` with the row-major counts.
std::string metrics_to_text(const MetricsReport& report);
// Aligned table for terminals.
std::string metrics_to_table(const MetricsReport& report);

}  // namespace star
