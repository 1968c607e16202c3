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

#include "star/glimpse.hpp"

#include <algorithm>
#include <cmath>

#include "star/errors.hpp"

namespace star {
namespace {

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

double cell(const Matrix& values, Index r, Index c) {
  if (r < 0 || c < 0 || r >= values.rows() || c >= values.cols()) return 0.0;
  return values(r, c);
}

}  // namespace

Vector Glimpse::flatten() const {
  Index total = 0;
  for (const Vector& s : scales) total += s.size();
  Vector out(total);
  Index at = 0;
  for (const Vector& s : scales) {
    out.segment(at, s.size()) = s;
    at += s.size();
  }
  return out;
}

PatchShape base_patch_shape(Index K, Index P) {
  if (K < 1 || P < 1) throw DomainError("base_patch_shape: window must be at least 1 x 1");
  return {std::max<Index>(1, ceil_div(K, 8)), std::max<Index>(1, ceil_div(P, 8))};
}

Index denormalize(double coord, Index extent) {
  if (extent < 1) throw DomainError("denormalize: extent must be >= 1");
  const double scaled = (coord + 1.0) / 2.0 * static_cast<double>(extent - 1);
  const auto idx = static_cast<Index>(std::lround(scaled));
  return std::clamp<Index>(idx, 0, extent - 1);
}

Matrix extract_patch(const Matrix& values, NormalizedLocation center, PatchShape shape) {
  const Index r0 = denormalize(center.t, values.rows()) - (shape.height - 1) / 2;
  const Index c0 = denormalize(center.l, values.cols()) - (shape.width - 1) / 2;
  Matrix patch(shape.height, shape.width);
  for (Index i = 0; i < shape.height; ++i)
    for (Index j = 0; j < shape.width; ++j) patch(i, j) = cell(values, r0 + i, c0 + j);
  return patch;
}

void foveate_into(const Matrix& values, NormalizedLocation center, const GlimpseGeometry& geometry,
                  double* out) {
  const Index ph = geometry.base.height;
  const Index pw = geometry.base.width;
  const Index ci = denormalize(center.t, values.rows());
  const Index cj = denormalize(center.l, values.cols());
  Index pool = 1;
  for (int s = 0; s < geometry.n_scales; ++s) {
    const Index h = ph * pool;
    const Index w = pw * pool;
    const Index r0 = ci - (h - 1) / 2;
    const Index c0 = cj - (w - 1) / 2;
    const double inv = 1.0 / static_cast<double>(pool * pool);
    for (Index i = 0; i < ph; ++i) {
      for (Index j = 0; j < pw; ++j) {
        double sum = 0.0;
        for (Index a = 0; a < pool; ++a)
          for (Index b = 0; b < pool; ++b) sum += cell(values, r0 + i * pool + a, c0 + j * pool + b);
        *out++ = sum * inv;
      }
    }
    pool *= geometry.scale_factor;
  }
}

Glimpse foveate(const Matrix& values, NormalizedLocation center, const GlimpseGeometry& geometry) {
  if (geometry.n_scales < 1 || geometry.scale_factor < 1) {
    throw DomainError("foveate: need n_scales >= 1 and scale_factor >= 1");
  }
  Vector flat(geometry.length());
  foveate_into(values, center, geometry, flat.data());
  Glimpse g;
  g.center = center;
  const Index per = geometry.base.height * geometry.base.width;
  for (int s = 0; s < geometry.n_scales; ++s) g.scales.emplace_back(flat.segment(s * per, per));
  return g;
}

}  // namespace star
