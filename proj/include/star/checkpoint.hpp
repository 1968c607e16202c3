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

// Checkpoint layout:
//
//   STAR1\n
//   config <key>=<value>\n           one line per RunConfig key
//   tensor <name> <rows> <cols>\n     one line per stored array, in order
//   end\n
//   <payload>                         little-endian float64 arrays, row-major,
//                                     in manifest order
//
// Parameter groups store "<group>.weight" (rows x cols) then "<group>.bias"
// (rows x 1). Standardization stats, when present, follow as "stats.mean" and
// "stats.stddev" (P x 1).

#include <optional>
#include <string>

#include "star/data.hpp"
#include "star/network.hpp"

namespace star {

struct Checkpoint {
  ModelParams params;
  std::optional<ChannelStats> stats;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace star
