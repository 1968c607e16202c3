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
#include "star/glimpse.hpp"

namespace star {
namespace {

Matrix ramp(Index K, Index P) {
  Matrix m(K, P);
  for (Index i = 0; i < K; ++i)
    for (Index j = 0; j < P; ++j) m(i, j) = static_cast<double>(100 * i + j);
  return m;
}

// Independent oracle: average of the (h x w) block at (r0, c0) with zero
// padding, computed cell by cell.
double block_mean(const Matrix& v, Index r0, Index c0, Index h, Index w) {
  double s = 0.0;
  for (Index i = r0; i < r0 + h; ++i)
    for (Index j = c0; j < c0 + w; ++j)
      if (i >= 0 && j >= 0 && i < v.rows() && j < v.cols()) s += v(i, j);
  return s / static_cast<double>(h * w);
}

double coord_of(Index cell, Index extent) {
  return extent == 1 ? 0.0 : 2.0 * static_cast<double>(cell) / static_cast<double>(extent - 1) - 1.0;
}

TEST(Glimpse, BasePatchShape) {
  EXPECT_EQ(base_patch_shape(20, 24).height, 3);
  EXPECT_EQ(base_patch_shape(20, 24).width, 3);
  EXPECT_EQ(base_patch_shape(20, 23).width, 3);
  EXPECT_EQ(base_patch_shape(8, 6).height, 1);
  EXPECT_EQ(base_patch_shape(8, 6).width, 1);
  EXPECT_EQ(base_patch_shape(1, 1).height, 1);
  EXPECT_EQ(base_patch_shape(17, 9).height, 3);
  EXPECT_EQ(base_patch_shape(17, 9).width, 2);
  EXPECT_THROW(base_patch_shape(0, 4), DomainError);
}

TEST(Glimpse, DenormalizeEndpointsAndClamp) {
  EXPECT_EQ(denormalize(-1.0, 20), 0);
  EXPECT_EQ(denormalize(1.0, 20), 19);
  EXPECT_EQ(denormalize(0.0, 21), 10);
  EXPECT_EQ(denormalize(-5.0, 20), 0);
  EXPECT_EQ(denormalize(5.0, 20), 19);
  EXPECT_EQ(denormalize(0.3, 1), 0);
  for (Index e = 1; e < 40; ++e)
    for (Index c = 0; c < e; ++c) EXPECT_EQ(denormalize(coord_of(c, e), e), c);
}

TEST(Glimpse, PatchPadsWithZeros) {
  const Matrix v = Matrix::Ones(5, 5);
  const Matrix p = extract_patch(v, {-1.0, -1.0}, {3, 3});
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(1, 1), 1.0);
  EXPECT_EQ(p.sum(), 4.0);
  const Matrix q = extract_patch(v, {1.0, 1.0}, {4, 4});
  // Even patches anchor the center at the top-left of the central block.
  EXPECT_EQ(q.topLeftCorner(2, 2).sum(), 4.0);
  EXPECT_EQ(q.sum(), 4.0);
}

TEST(Glimpse, ScalesMatchBlockAverageOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix v(20, 24);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = n(rng);
  GlimpseGeometry geom{base_patch_shape(20, 24), 3, 2};
  for (Index ci = 0; ci < 20; ci += 3) {
    for (Index cj = 0; cj < 24; cj += 5) {
      const Glimpse g = foveate(v, {coord_of(ci, 20), coord_of(cj, 24)}, geom);
      ASSERT_EQ(g.scales.size(), 3u);
      Index pool = 1;
      for (int s = 0; s < 3; ++s) {
        const Index h = 3 * pool;
        const Index r0 = ci - (h - 1) / 2;
        const Index c0 = cj - (h - 1) / 2;
        for (Index i = 0; i < 3; ++i)
          for (Index j = 0; j < 3; ++j)
            EXPECT_NEAR(g.scales[static_cast<std::size_t>(s)](i * 3 + j),
                        block_mean(v, r0 + i * pool, c0 + j * pool, pool, pool), 1e-12);
        pool *= 2;
      }
    }
  }
}

TEST(Glimpse, ConstantLengthForEveryLocationAndShape) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_int_distribution<Index> ext(1, 40);
  for (int trial = 0; trial < 300; ++trial) {
    const Index K = ext(rng), P = ext(rng);
    GlimpseGeometry geom{base_patch_shape(K, P), 1 + trial % 4, 1 + trial % 3};
    const Vector flat = foveate(Matrix::Ones(K, P), {u(rng), u(rng)}, geom).flatten();
    EXPECT_EQ(flat.size(), geom.length());
    std::vector<double> raw(static_cast<std::size_t>(geom.length()));
    foveate_into(Matrix::Ones(K, P), {u(rng), u(rng)}, geom, raw.data());
  }
}

TEST(Glimpse, DefaultGlimpseHas27Values) {
  GlimpseGeometry geom{base_patch_shape(20, 24), 3, 2};
  EXPECT_EQ(geom.length(), 27);
}

TEST(Glimpse, TranslationConsistency) {
  // Shifting the content and the center by the same offset leaves the glimpse
  // unchanged as long as every read stays inside the window.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  const Index K = 60, P = 60;
  Matrix big(K, P);
  for (Index i = 0; i < big.size(); ++i) big.data()[i] = n(rng);
  GlimpseGeometry geom{{3, 3}, 3, 2};
  for (int dr = -4; dr <= 4; dr += 2) {
    for (int dc = -5; dc <= 5; dc += 5) {
      Matrix shifted = Matrix::Zero(K, P);
      for (Index i = 0; i < K; ++i)
        for (Index j = 0; j < P; ++j) {
          const Index si = i + dr, sj = j + dc;
          if (si >= 0 && sj >= 0 && si < K && sj < P) shifted(si, sj) = big(i, j);
        }
      const Vector a = foveate(big, {coord_of(30, K), coord_of(30, P)}, geom).flatten();
      const Vector b = foveate(shifted, {coord_of(30 + dr, K), coord_of(30 + dc, P)}, geom).flatten();
      EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Glimpse, OutsideReadsAreZeroNotClamped) {
  const Matrix v = ramp(20, 24);
  GlimpseGeometry geom{base_patch_shape(20, 24), 3, 2};
  const Glimpse g = foveate(v, {-1.0, -1.0}, geom);
  // The coarsest 12 x 12 patch anchored at (-5, -5) averages 4 x 4 blocks.
  EXPECT_NEAR(g.scales[2](0), block_mean(v, -5, -5, 4, 4), 1e-12);
  EXPECT_EQ(g.scales[0](0), 0.0);
}

TEST(Glimpse, ScaleOneIsTheRawPatch) {
  const Matrix v = ramp(20, 24);
  GlimpseGeometry geom{base_patch_shape(20, 24), 3, 2};
  const NormalizedLocation at{0.1, -0.4};
  const Glimpse g = foveate(v, at, geom);
  const Matrix p = extract_patch(v, at, {3, 3});
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_EQ(g.scales[0](i * 3 + j), p(i, j));
}

}  // namespace
}  // namespace star
