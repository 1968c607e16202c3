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

#include <sstream>

#include "star/config.hpp"
#include "star/errors.hpp"

namespace star {
namespace {

TEST(Config, DefaultsMatchThePublishedSetting) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.window_length, 20);
  EXPECT_EQ(cfg.overlap, 0.5);
  EXPECT_EQ(cfg.enc_glimpse_width, 128);
  EXPECT_EQ(cfg.enc_loc_width, 128);
  EXPECT_EQ(cfg.enc_out_width, 220);
  EXPECT_EQ(cfg.conv_filters, 40);
  EXPECT_EQ(cfg.core_width, 220);
  EXPECT_EQ(cfg.episode_length, 40);
  EXPECT_EQ(cfg.variance, 0.22);
  EXPECT_EQ(cfg.effective_time_variance(), 0.22);
  EXPECT_EQ(cfg.variant, Variant::S6);
}

TEST(Config, ParsesCommentsAndWhitespace) {
  std::istringstream in("# run\n agents = 2 \nvariance=0.5 # trailing\n\nreinforce_target=class\nuse_baseline=true\n");
  const RunConfig cfg = parse_config(in);
  EXPECT_EQ(cfg.agents, 2);
  EXPECT_EQ(cfg.variance, 0.5);
  EXPECT_EQ(cfg.reinforce_target, ReinforceTarget::kClassLogLikelihood);
  EXPECT_TRUE(cfg.use_baseline);
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  std::istringstream unknown("agnets=2\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream no_eq("agents\n");
  EXPECT_THROW(parse_config(no_eq), ConfigError);
  std::istringstream bad_int("agents=two\n");
  EXPECT_THROW(parse_config(bad_int), ConfigError);
  std::istringstream partial("agents=2x\n");
  EXPECT_THROW(parse_config(partial), ConfigError);
  std::istringstream range("agents=0\n");
  EXPECT_THROW(parse_config(range), ConfigError);
  std::istringstream overlap("overlap=1\n");
  EXPECT_THROW(parse_config(overlap), ConfigError);
  std::istringstream target("reinforce_target=both\n");
  EXPECT_THROW(parse_config(target), ConfigError);
}

TEST(Config, TextRoundTripsExactly) {
  RunConfig cfg;
  cfg.variance = 0.1 + 0.2;
  cfg.learning_rate = 1.0 / 3.0;
  cfg.seed = 18446744073709551557ull;
  cfg.variant = Variant::S4;
  cfg.use_conv_merge = false;
  std::istringstream in(config_to_text(cfg));
  const RunConfig back = parse_config(in);
  EXPECT_EQ(config_to_text(back), config_to_text(cfg));
  EXPECT_EQ(back.variance, cfg.variance);
  EXPECT_EQ(back.learning_rate, cfg.learning_rate);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.variant, Variant::S4);
}

TEST(Config, VariantTags) {
  for (Variant v : {Variant::S1, Variant::S2, Variant::S3, Variant::S4, Variant::S5, Variant::S6}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("S7"), ConfigError);
  EXPECT_THROW(parse_variant("s6"), ConfigError);
}

TEST(Config, GlimpseGeometryFollowsWindowShape) {
  RunConfig cfg;
  cfg.channels = 24;
  const GlimpseGeometry g = cfg.glimpse_geometry();
  EXPECT_EQ(g.base.height, 3);
  EXPECT_EQ(g.base.width, 3);
  EXPECT_EQ(g.length(), 27);
}

}  // namespace
}  // namespace star
