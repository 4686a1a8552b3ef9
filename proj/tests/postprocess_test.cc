// Copyright 2026 The protottl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "protottl/postprocess.h"

#include <gtest/gtest.h>

#include <random>

#include "protottl/box.h"
#include "protottl/error.h"
#include "test_util.h"

namespace protottl {
namespace {

using oracle::OracleIou;
using oracle::OracleNmsClassAgnostic;
using oracle::OracleNmsClassSpecific;
using oracle::RandomDetections;

Detection Det(Box box, int cls, double score, int index = 0) {
  Detection d;
  d.box = box;
  d.class_id = cls;
  d.score = score;
  d.proposal_index = index;
  return d;
}

TEST(IouTest, HandExamples) {
  const Box unit{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(Iou(unit, unit), 1.0);
  EXPECT_DOUBLE_EQ(Iou(unit, {2, 2, 3, 3}), 0.0);
  EXPECT_DOUBLE_EQ(Iou(unit, {0, 0, 0.5, 1}), 0.5);
  // Touching edges do not overlap.
  EXPECT_DOUBLE_EQ(Iou(unit, {1, 0, 2, 1}), 0.0);
}

TEST(IouTest, MatchesOracleAndIsSymmetric) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Box a = oracle::RandomBox(rng), b = oracle::RandomBox(rng);
    const double iou = Iou(a, b);
    EXPECT_NEAR(iou, OracleIou(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(iou, Iou(b, a));
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
  }
}

TEST(BoxTest, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const Box gt = oracle::RandomBox(rng), ref = oracle::RandomBox(rng);
    const Box back = DecodeBox(EncodeBox(gt, ref), ref);
    EXPECT_NEAR(back.x1, gt.x1, 1e-9);
    EXPECT_NEAR(back.y1, gt.y1, 1e-9);
    EXPECT_NEAR(back.x2, gt.x2, 1e-9);
    EXPECT_NEAR(back.y2, gt.y2, 1e-9);
  }
}

TEST(BoxTest, IdentityEncodesToZero) {
  const Box b{0.1, 0.2, 0.4, 0.7};
  for (double d : EncodeBox(b, b)) EXPECT_EQ(d, 0.0);
}

TEST(BoxTest, RejectsDegenerate) {
  EXPECT_FALSE(IsValidBox({0.5, 0.5, 0.5, 0.9}));
  EXPECT_THROW(ValidateBox({0.5, 0.5, 0.4, 0.9}), DataError);
}

TEST(NmsClassSpecificTest, EmptyInput) {
  EXPECT_TRUE(NmsClassSpecific({}, 0.5).empty());
}

TEST(NmsClassSpecificTest, HigherScoreWins) {
  const Box a{0, 0, 1, 1};
  const Box b{0, 0, 1, 0.9};  // IoU 0.9 with a
  auto kept = NmsClassSpecific({Det(b, 1, 0.7, 1), Det(a, 1, 0.8, 0)}, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_DOUBLE_EQ(kept[0].score, 0.8);
}

TEST(NmsClassSpecificTest, NeverSuppressesAcrossClasses) {
  const Box a{0, 0, 1, 1};
  auto kept = NmsClassSpecific({Det(a, 1, 0.8, 0), Det(a, 2, 0.7, 1)}, 0.5);
  EXPECT_EQ(kept.size(), 2u);
}

TEST(NmsClassSpecificTest, MatchesOracleOnRandomSets) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(0, 50);
  for (int t = 0; t < 300; ++t) {
    auto dets = RandomDetections(rng, size(rng), 3);
    EXPECT_EQ(NmsClassSpecific(dets, 0.5), OracleNmsClassSpecific(dets, 0.5));
  }
}

TEST(NmsClassSpecificTest, Idempotent) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    auto once = NmsClassSpecific(RandomDetections(rng, 40, 3), 0.4);
    EXPECT_EQ(NmsClassSpecific(once, 0.4), once);
  }
}

TEST(NmsClassSpecificTest, ThresholdOneKeepsDistinctBoxes) {
  std::mt19937_64 rng(8);
  auto dets = RandomDetections(rng, 30, 2);
  // Jittered boxes are pairwise distinct, so IoU < 1 everywhere.
  EXPECT_EQ(NmsClassSpecific(dets, 1.0).size(), dets.size());
}

TEST(PartitionTest, DefaultThresholds) {
  const Box b{0, 0, 1, 1};
  auto set = PartitionPseudo({Det(b, 0, 0.95), Det(b, 0, 0.8), Det(b, 0, 0.5)},
                             ThresholdConfig{});
  ASSERT_EQ(set.hard.size(), 1u);
  EXPECT_DOUBLE_EQ(set.hard[0].score, 0.95);
  ASSERT_EQ(set.implicit.size(), 1u);
  EXPECT_DOUBLE_EQ(set.implicit[0].score, 0.8);
  EXPECT_EQ(set.discarded_count, 1);
}

TEST(PartitionTest, AllBelowLower) {
  const Box b{0, 0, 1, 1};
  auto set = PartitionPseudo({Det(b, 0, 0.1), Det(b, 0, 0.69)}, {});
  EXPECT_TRUE(set.hard.empty());
  EXPECT_TRUE(set.implicit.empty());
  EXPECT_EQ(set.discarded_count, 2);
}

TEST(PartitionTest, CountsMatchFilterOracle) {
  std::mt19937_64 rng(21);
  auto dets = RandomDetections(rng, 200, 4);
  ThresholdConfig cfg;
  auto set = PartitionPseudo(dets, cfg);
  int hi = 0, mid = 0, lo = 0;
  for (const Detection& d : dets) {
    if (d.score >= 0.9) ++hi;
    else if (d.score >= 0.7) ++mid;
    else ++lo;
  }
  EXPECT_EQ(static_cast<int>(set.hard.size()), hi);
  EXPECT_EQ(static_cast<int>(set.implicit.size()), mid);
  EXPECT_EQ(set.discarded_count, lo);
  EXPECT_EQ(set.hard.size() + set.implicit.size() + set.discarded_count,
            dets.size());
}

TEST(PartitionTest, RejectsInvertedThresholds) {
  ThresholdConfig cfg;
  cfg.delta_lower = 0.95;
  EXPECT_THROW(PartitionPseudo({}, cfg), ConfigError);
  cfg.delta_lower = 0.9;  // equal is also invalid
  EXPECT_THROW(ValidateThresholds(cfg), ConfigError);
}

TEST(NmsClassAgnosticTest, HardBoxSuppresses) {
  const Box hard{0, 0, 1, 1};
  const Box near{0, 0, 1, 0.8};  // IoU 0.8
  auto kept = NmsClassAgnostic({{near, {}, 0.8, 0}}, {Det(hard, 0, 0.95)}, 0.5);
  EXPECT_TRUE(kept.empty());
}

TEST(NmsClassAgnosticTest, DisjointSurvive) {
  std::vector<ImplicitCandidate> in;
  for (int i = 0; i < 4; ++i) {
    in.push_back({{i * 2.0, 0, i * 2.0 + 1, 1}, {}, 0.75, i});
  }
  EXPECT_EQ(NmsClassAgnostic(in, {}, 0.5).size(), 4u);
}

TEST(NmsClassAgnosticTest, MatchesOracleAndIgnoresClasses) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> size(0, 50);
  for (int t = 0; t < 300; ++t) {
    auto dets = RandomDetections(rng, size(rng), 3);
    auto set = PartitionPseudo(dets, {0.8, 0.3, 0.5});
    auto kept = NmsClassAgnostic(set.implicit, set.hard, 0.5);
    EXPECT_EQ(kept, OracleNmsClassAgnostic(set.implicit, set.hard, 0.5));
    for (Detection& h : set.hard) h.class_id = (h.class_id + 1) % 3;
    EXPECT_EQ(NmsClassAgnostic(set.implicit, set.hard, 0.5), kept);
    EXPECT_EQ(NmsClassAgnostic(kept, set.hard, 0.5), kept);
  }
}

}  // namespace
}  // namespace protottl
