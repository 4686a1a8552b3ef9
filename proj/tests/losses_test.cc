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

#include "protottl/losses.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "protottl/error.h"
#include "test_util.h"

namespace protottl {
namespace {

using oracle::GradInstance;
using oracle::MakeGradInstance;
using oracle::MaxGradRelError;

std::vector<int> Classes(int n) {
  std::vector<int> c;
  for (int i = 0; i < n; ++i) c.push_back(i);
  return c;
}

bool AllZero(const std::vector<double>& v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

TEST(DetectionLossTest, UniformClassifierCrossEntropy) {
  const DetectorParams p = ZeroParams(3, Classes(19));
  ProposalTarget t;
  t.feature = {0.5, -1.0, 2.0};
  t.class_row = 4;
  const std::vector<ProposalTarget> targets{t};
  const LossResult r = DetectionLoss(p, targets);
  EXPECT_NEAR(r.heads.roi_cls, std::log(20.0), 1e-12);
  EXPECT_NEAR(r.heads.roi_cls, 2.9957, 1e-4);
}

TEST(DetectionLossTest, PerfectPredictor) {
  DetectorParams p = ZeroParams(1, Classes(2));
  p.b_cls = {60.0, -60.0, -60.0};
  p.b_obj = {60.0};
  p.b_reg = {0.1, -0.2, 0.3, 0.0};
  ProposalTarget t;
  t.feature = {0.0};
  t.objectness = 1;
  t.class_row = 0;
  t.has_roi_reg = true;
  t.roi_target = {0.1, -0.2, 0.3, 0.0};
  const std::vector<ProposalTarget> targets{t};
  const LossResult r = DetectionLoss(p, targets);
  EXPECT_EQ(r.heads.roi_reg, 0.0);
  EXPECT_LT(r.heads.roi_cls, 1e-20);
  EXPECT_LT(r.heads.rpn_cls, 1e-20);
}

TEST(DetectionLossTest, EmptyBatch) {
  const DetectorParams p = ZeroParams(2, Classes(2));
  const LossResult r = DetectionLoss(p, {});
  EXPECT_EQ(r.loss, 0.0);
  for (const auto& b : r.grads.Blocks()) {
    for (double g : b.values) EXPECT_EQ(g, 0.0);
  }
}

TEST(SupervisedTargetsTest, CollapsedRefinedBoxHasNoRoiTarget) {
  Scene scene;
  scene.objects.push_back({{0.2, 0.2, 0.4, 0.5}, 0, {1.0, 0.0}});
  scene.proposals.push_back({{0.21, 0.2, 0.41, 0.5}, {1.0, 0.0}});
  const std::vector<Scene> scenes{scene};
  DetectorParams p = ZeroParams(2, Classes(1));
  auto targets = BuildSupervisedTargets(p, scenes, 0.5);
  ASSERT_EQ(targets.size(), 1u);
  EXPECT_TRUE(targets[0].has_rpn_reg);
  EXPECT_TRUE(targets[0].has_roi_reg);
  p.b_rpnreg = {0.0, 0.0, 0.0, -10.0};
  targets = BuildSupervisedTargets(p, scenes, 0.5);
  EXPECT_TRUE(targets[0].has_rpn_reg);
  EXPECT_FALSE(targets[0].has_roi_reg);
  EXPECT_EQ(targets[0].objectness, 1);
}

TEST(SupervisedLossTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradInstance in = MakeGradInstance(seed);
    const auto targets = BuildSupervisedTargets(in.params, in.scenes, 0.5);
    const LossResult r = SupervisedLoss(in.params, in.scenes, 0.5);
    const double err = MaxGradRelError(in.params, r.grads, [&](const auto& p) {
      return DetectionLoss(p, targets).loss;
    });
    EXPECT_LE(err, 1e-4) << "seed " << seed;
    EXPECT_GE(r.loss, 0.0);
  }
}

TEST(UnsupervisedLossTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradInstance in = MakeGradInstance(seed);
    const LossResult r =
        UnsupervisedLoss(in.params, in.scenes, in.pseudo, 0.5);
    const double err = MaxGradRelError(in.params, r.grads, [&](const auto& p) {
      return UnsupervisedLoss(p, in.scenes, in.pseudo, 0.5).loss;
    });
    EXPECT_LE(err, 1e-4) << "seed " << seed;
    EXPECT_GT(r.loss, 0.0);
  }
}

TEST(UnsupervisedLossTest, NeverTouchesRegressionHeads) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradInstance in = MakeGradInstance(seed);
    const LossResult r =
        UnsupervisedLoss(in.params, in.scenes, in.pseudo, 0.5);
    EXPECT_TRUE(AllZero(r.grads.w_reg));
    EXPECT_TRUE(AllZero(r.grads.b_reg));
    EXPECT_TRUE(AllZero(r.grads.w_rpnreg));
    EXPECT_TRUE(AllZero(r.grads.b_rpnreg));
    EXPECT_EQ(r.heads.rpn_reg, 0.0);
    EXPECT_EQ(r.heads.roi_reg, 0.0);
  }
}

TEST(UnsupervisedLossTest, EmptyPseudoSet) {
  const GradInstance in = MakeGradInstance(3);
  std::vector<PseudoLabelSet> none(in.scenes.size());
  const LossResult r = UnsupervisedLoss(in.params, in.scenes, none, 0.5);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(AllZero(r.grads.w_cls));
  EXPECT_TRUE(AllZero(r.grads.w_obj));
}

TEST(UnsupervisedLossTest, ImplicitProposalsAreForegroundWithoutClass) {
  const GradInstance in = MakeGradInstance(5);
  const auto targets =
      BuildPseudoTargets(in.params, in.scenes, in.pseudo, 0.5);
  int implicit = 0;
  for (const ProposalTarget& t : targets) {
    EXPECT_FALSE(t.has_rpn_reg);
    EXPECT_FALSE(t.has_roi_reg);
    if (t.objectness == 1 && t.class_row < 0) ++implicit;
  }
  EXPECT_GT(implicit, 0);
}

std::vector<KlCandidate> OneCandidate(std::vector<double> soft) {
  KlCandidate c;
  c.feature = {0.0};
  c.soft_label = std::move(soft);
  return {c};
}

TEST(KlLossTest, HandValue) {
  DetectorParams p = ZeroParams(1, Classes(2));
  p.b_cls = {std::log(0.9), std::log(0.1), -1000.0};
  const LossResult r = KlLoss(p, OneCandidate({0.5, 0.5, 0.0}));
  const double expected =
      0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  EXPECT_NEAR(r.loss, expected, 1e-12);
  EXPECT_NEAR(r.loss, 0.5108, 1e-4);
  EXPECT_EQ(r.clamped, 0);
}

TEST(KlLossTest, ZeroWhenDistributionsMatch) {
  DetectorParams p = ZeroParams(1, Classes(2));
  p.b_cls = {std::log(0.3), std::log(0.7), -1000.0};
  const LossResult r = KlLoss(p, OneCandidate({0.3, 0.7, 0.0}));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(KlLossTest, ClampsVanishingProbabilities) {
  DetectorParams p = ZeroParams(1, Classes(2));
  p.b_cls = {0.0, -2000.0, 0.0};
  const LossResult r = KlLoss(p, OneCandidate({0.5, 0.5, 0.0}));
  EXPECT_EQ(r.clamped, 1);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(KlLossTest, WrongLabelWidth) {
  const DetectorParams p = ZeroParams(1, Classes(2));
  EXPECT_THROW(KlLoss(p, OneCandidate({1.0, 0.0})), DimensionError);
}

TEST(KlLossTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradInstance in = MakeGradInstance(seed);
    const LossResult r = KlLoss(in.params, in.candidates);
    const double err = MaxGradRelError(in.params, r.grads, [&](const auto& p) {
      return KlLoss(p, in.candidates).loss;
    });
    EXPECT_LE(err, 1e-4) << "seed " << seed;
    EXPECT_GE(r.loss, 0.0);
  }
}

TEST(TotalLossTest, DefaultWeights) {
  const LossBreakdown b = TotalLoss(1.0, 2.0, 3.0, {0.5, 0.1});
  EXPECT_NEAR(b.l_total, 2.3, 1e-12);
}

TEST(TotalLossTest, SupervisedOnly) {
  EXPECT_EQ(TotalLoss(1.7, 2.0, 3.0, {0.0, 0.0}).l_total, 1.7);
}

TEST(TotalLossTest, RandomWeightsMatchScalarOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng), c = u(rng), l1 = u(rng), l2 = u(rng);
    EXPECT_NEAR(TotalLoss(a, b, c, {l1, l2}).l_total, a + l1 * b + l2 * c,
                1e-12);
  }
  EXPECT_THROW(TotalLoss(1, 1, 1, {-0.1, 0.0}), ConfigError);
}

TEST(TotalLossTest, CombinedGradientIsWeightedSum) {
  std::mt19937_64 rng(9);
  const auto g1 = oracle::RandomDetector(rng, 3, Classes(2));
  const auto g2 = oracle::RandomDetector(rng, 3, Classes(2));
  const auto g3 = oracle::RandomDetector(rng, 3, Classes(2));
  const auto sum = CombineGradients(g1, g2, g3, {0.5, 0.1});
  for (std::size_t i = 0; i < sum.w_cls.size(); ++i) {
    EXPECT_NEAR(sum.w_cls[i], g1.w_cls[i] + 0.5 * g2.w_cls[i] + 0.1 * g3.w_cls[i],
                1e-12);
  }
}

}  // namespace
}  // namespace protottl
