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

// Foveated glimpses over a K x P sensor window. Rows are time steps, columns
// are modalities. Locations are normalized to [-1, 1] on both axes.
//
// Patch anchoring: a patch of height h centered at row index c covers rows
// [c - (h - 1) / 2, c - (h - 1) / 2 + h) with integer division, i.e. the
// center cell is the middle cell for odd h and the top-left cell of the
// central 2 x 2 block for even h. Columns follow the same rule. Cells
// outside the window read as zero.

#include <vector>

#include "star/numerics.hpp"

namespace star {

struct Window {
  Matrix values;  // K x P
  int label = 0;
  int subject = 0;
};

struct NormalizedLocation {
  double t = 0.0;  // time axis
  double l = 0.0;  // modality axis
};

struct PatchShape {
  Index height = 1;
  Index width = 1;
};

struct GlimpseGeometry {
  PatchShape base;
  int n_scales = 3;
  int scale_factor = 2;

  Index length() const { return static_cast<Index>(n_scales) * base.height * base.width; }
};

struct Glimpse {
  std::vector<Vector> scales;  // fine to coarse, each flattened row-major
  NormalizedLocation center;

  Vector flatten() const;
};

// ceil(K/8) x ceil(P/8), never below 1 x 1.
PatchShape base_patch_shape(Index K, Index P);

// round((coord + 1) / 2 * (extent - 1)) clamped to [0, extent - 1].
Index denormalize(double coord, Index extent);

Matrix extract_patch(const Matrix& values, NormalizedLocation center, PatchShape shape);

Glimpse foveate(const Matrix& values, NormalizedLocation center, const GlimpseGeometry& geometry);

// Writes the flattened glimpse into `out` (geometry.length() doubles).
void foveate_into(const Matrix& values, NormalizedLocation center, const GlimpseGeometry& geometry,
                  double* out);

}  // namespace star
