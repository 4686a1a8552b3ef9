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

#include "protottl/prototypes.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "protottl/error.h"
#include "test_util.h"

namespace protottl {
namespace {

using oracle::RandomVector;

double Norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(InitPrototypesTest, SingleShotIsTheFeature) {
  const FeatureVector f{0.3, -1.2, 2.0};
  const auto store = InitPrototypes({4}, {{4, {f}}}, 1);
  EXPECT_EQ(store.Prototype(4), f);
}

TEST(InitPrototypesTest, CancellingShotsAreRejected) {
  const FeatureVector v{1.0, -2.0};
  const FeatureVector w{-1.0, 2.0};
  EXPECT_THROW(InitPrototypes({0}, {{0, {v, w}}}, 2), DataError);
}

TEST(InitPrototypesTest, MeanOfThreeShots) {
  std::mt19937_64 rng(1);
  std::vector<FeatureVector> shots;
  for (int i = 0; i < 3; ++i) shots.push_back(RandomVector(rng, 5));
  const auto store = InitPrototypes({2}, {{2, shots}}, 3);
  for (int j = 0; j < 5; ++j) {
    const double mean = (shots[0][j] + shots[1][j] + shots[2][j]) / 3.0;
    EXPECT_NEAR(store.Prototype(2)[j], mean, 1e-15);
  }
}

TEST(InitPrototypesTest, WrongShotCountNamesClass) {
  try {
    InitPrototypes({0, 7}, {{0, {{1.0}}}, {7, {{1.0}, {2.0}}}}, 1);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("class 7"), std::string::npos);
  }
  EXPECT_THROW(InitPrototypes({0, 1}, {{0, {{1.0}}}}, 1), DataError);
}

TEST(CosineTest, HandValues) {
  const std::vector<double> f{1, 1}, p{1, 0}, q{0, 3};
  EXPECT_NEAR(CosineSim(f, p), std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(CosineSim(p, p), 1.0);
  EXPECT_DOUBLE_EQ(CosineSim(p, q), 0.0);
  EXPECT_DOUBLE_EQ(NormalizedSim(p, p), 1.0);
  EXPECT_DOUBLE_EQ(NormalizedSim(p, std::vector<double>{-2, 0}), 0.0);
  EXPECT_DOUBLE_EQ(NormalizedSim(p, q), 0.5);
  EXPECT_THROW(CosineSim(p, std::vector<double>{0, 0}), DataError);
}

TEST(UpdatePrototypeTest, HandEvaluation) {
  const auto out = UpdatePrototype(std::vector<double>{1, 0},
                                   std::vector<double>{0, 1});
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
}

TEST(UpdatePrototypeTest, FixedPointsAreExact) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 1000; ++t) {
    const auto p = RandomVector(rng, 8);
    std::vector<double> neg(p);
    for (double& x : neg) x = -x;
    EXPECT_EQ(UpdatePrototype(p, p), p);
    EXPECT_EQ(UpdatePrototype(p, neg), p);
  }
}

TEST(UpdatePrototypeTest, ZeroEvidenceSkips) {
  const std::vector<double> p{0.2, 0.4};
  EXPECT_EQ(UpdatePrototype(p, std::vector<double>{0, 0}), p);
}

TEST(UpdatePrototypeTest, ResultIsOnSegment) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const auto p = RandomVector(rng, 6);
    const auto f = RandomVector(rng, 6, 2.0);
    const auto out = UpdatePrototype(p, f);
    // out = p + s (f - p); recover s from the largest coordinate gap.
    int j = 0;
    for (int i = 1; i < 6; ++i) {
      if (std::abs(f[i] - p[i]) > std::abs(f[j] - p[j])) j = i;
    }
    const double s = (out[j] - p[j]) / (f[j] - p[j]);
    EXPECT_GE(s, -1e-12);
    EXPECT_LE(s, 1.0 + 1e-12);
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(out[i], p[i] + s * (f[i] - p[i]), 1e-9);
    }
    EXPECT_LE(Norm(out), std::max(Norm(p), Norm(f)) + 1e-12);
  }
}

PrototypeStore Store(std::vector<FeatureVector> protos) {
  std::vector<int> ids;
  std::map<int, std::vector<FeatureVector>> support;
  for (std::size_t k = 0; k < protos.size(); ++k) {
    ids.push_back(static_cast<int>(k));
    support[static_cast<int>(k)] = {protos[k]};
  }
  return InitPrototypes(ids, support, 1);
}

TEST(SoftLabelTest, EqualSimilaritiesAreUniform) {
  const auto store = Store({{1, 0}, {0, 1}});
  const auto u = MakeSoftLabel(std::vector<double>{1, 1}, store);
  ASSERT_EQ(u.size(), 3u);
  EXPECT_NEAR(u[0], 0.5, 1e-15);
  EXPECT_NEAR(u[1], 0.5, 1e-15);
  EXPECT_EQ(u[2], 0.0);
}

TEST(SoftLabelTest, SimilaritiesOneAndZero) {
  const auto store = Store({{1, 0}, {0, 1}});
  const auto u = MakeSoftLabel(std::vector<double>{2, 0}, store);
  const double e = std::exp(1.0);
  EXPECT_NEAR(u[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(u[1], 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(u[0], 0.7311, 1e-4);
  EXPECT_NEAR(u[1], 0.2689, 1e-4);
  EXPECT_EQ(u[2], 0.0);
}

TEST(SoftLabelTest, ArgmaxIsMatchingPrototype) {
  const auto store = Store({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  for (int k = 0; k < 3; ++k) {
    const auto u = MakeSoftLabel(store.prototypes[k], store);
    for (int j = 0; j < 3; ++j) {
      if (j != k) {
        EXPECT_GT(u[k], u[j]);
      }
    }
  }
}

TEST(SoftLabelTest, TemperatureSharpens) {
  const auto store = Store({{1, 0}, {0, 1}});
  const std::vector<double> f{2, 1};
  EXPECT_GT(MakeSoftLabel(f, store, 0.1)[0], MakeSoftLabel(f, store, 1.0)[0]);
  EXPECT_THROW(MakeSoftLabel(f, store, 0.0), ConfigError);
}

TEST(BatchUpdateTest, NoEvidenceLeavesStoreUnchanged) {
  auto store = Store({{1, 0}, {0, 1}});
  const auto before = store.prototypes;
  BatchUpdate(&store, {}, {});
  EXPECT_EQ(store.prototypes, before);
}

TEST(BatchUpdateTest, PrototypeEvidenceIsFixedPoint) {
  auto store = Store({{0.3, 0.7}, {0, 1}});
  Detection d;
  d.class_id = 0;
  d.feature = store.prototypes[0];
  const auto before = store.prototypes;
  BatchUpdate(&store, std::vector<Detection>{d}, {});
  EXPECT_EQ(store.prototypes, before);
}

TEST(BatchUpdateTest, TwoDetectionsMeanThenUpdate) {
  std::mt19937_64 rng(4);
  auto store = Store({RandomVector(rng, 4), RandomVector(rng, 4)});
  const auto p_old = store.prototypes[1];
  std::vector<Detection> dets(2);
  for (Detection& d : dets) {
    d.class_id = 1;
    d.feature = RandomVector(rng, 4);
  }
  BatchUpdate(&store, dets, {});
  std::vector<double> avg(4);
  double dot = 0.0, np = 0.0, na = 0.0;
  for (int i = 0; i < 4; ++i) {
    avg[i] = (dets[0].feature[i] + dets[1].feature[i]) / 2.0;
  }
  for (int i = 0; i < 4; ++i) {
    dot += p_old[i] * avg[i];
    np += p_old[i] * p_old[i];
    na += avg[i] * avg[i];
  }
  const double s = (dot / std::sqrt(np * na) + 1.0) / 2.0;
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(store.prototypes[1][i], p_old[i] * (1 - s) + avg[i] * s, 1e-12);
  }
  EXPECT_EQ(store.update_counts[0], 0);
  EXPECT_EQ(store.update_counts[1], 1);
}

TEST(BatchUpdateTest, CumulativeAveragesAcrossBatches) {
  auto store = Store({{1, 0}});
  LabeledFeature a{0, {0, 1}};
  LabeledFeature b{0, {0, 3}};
  BatchUpdate(&store, {}, std::vector<LabeledFeature>{a},
              PrototypeAveraging::kCumulative);
  BatchUpdate(&store, {}, std::vector<LabeledFeature>{b},
              PrototypeAveraging::kCumulative);
  EXPECT_EQ(store.evidence_count[0], 2);
  EXPECT_DOUBLE_EQ(store.evidence_sum[0][1], 4.0);
}

TEST(BatchUpdateTest, UnknownClassIsError) {
  auto store = Store({{1, 0}});
  Detection d;
  d.class_id = 9;
  d.feature = {1, 0};
  EXPECT_THROW(BatchUpdate(&store, std::vector<Detection>{d}, {}), DataError);
}

}  // namespace
}  // namespace protottl
