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

#include <algorithm>
#include <cmath>

#include "protottl/detector.h"
#include "protottl/error.h"
#include "protottl/fingerprint.h"

namespace protottl {
namespace {

double SquaredNorm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

bool IsZero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

int PrototypeStore::IndexOf(int class_id) const {
  auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
  return it == class_ids.end() ? -1
                               : static_cast<int>(it - class_ids.begin());
}

const FeatureVector& PrototypeStore::Prototype(int class_id) const {
  const int k = IndexOf(class_id);
  if (k < 0) {
    throw DataError("no prototype for class " + std::to_string(class_id));
  }
  return prototypes[k];
}

PrototypeStore InitPrototypes(
    const std::vector<int>& class_ids,
    const std::map<int, std::vector<FeatureVector>>& support, int shots) {
  if (shots < 1) throw DataError("init_prototypes: shots must be >= 1");
  PrototypeStore store;
  for (int c : class_ids) {
    if (store.IndexOf(c) >= 0) {
      throw DataError("init_prototypes: duplicate class " + std::to_string(c));
    }
    auto it = support.find(c);
    if (it == support.end()) {
      throw DataError("init_prototypes: class " + std::to_string(c) +
                      " has no support features");
    }
    const std::vector<FeatureVector>& feats = it->second;
    if (static_cast<int>(feats.size()) != shots) {
      throw DataError("init_prototypes: class " + std::to_string(c) + " has " +
                      std::to_string(feats.size()) + " support features, " +
                      "expected " + std::to_string(shots));
    }
    FeatureVector mean(feats.front().size(), 0.0);
    for (const FeatureVector& f : feats) {
      if (f.size() != mean.size()) {
        throw DataError("init_prototypes: class " + std::to_string(c) +
                        " has features of mixed dimension");
      }
      for (std::size_t i = 0; i < f.size(); ++i) mean[i] += f[i];
    }
    for (double& x : mean) x /= shots;
    if (IsZero(mean)) {
      throw DataError("init_prototypes: class " + std::to_string(c) +
                      " averages to the zero vector");
    }
    store.class_ids.push_back(c);
    store.prototypes.push_back(std::move(mean));
  }
  for (const auto& [c, feats] : support) {
    if (store.IndexOf(c) < 0) {
      throw DataError("init_prototypes: support given for unknown class " +
                      std::to_string(c));
    }
  }
  const std::size_t dim = store.prototypes.empty() ? 0 : store.prototypes[0].size();
  for (std::size_t k = 0; k < store.prototypes.size(); ++k) {
    if (store.prototypes[k].size() != dim) {
      throw DataError("init_prototypes: class " +
                      std::to_string(store.class_ids[k]) +
                      " has a different feature dimension");
    }
  }
  store.update_counts.assign(store.class_ids.size(), 0);
  store.evidence_sum.assign(store.class_ids.size(), FeatureVector(dim, 0.0));
  store.evidence_count.assign(store.class_ids.size(), 0);
  return store;
}

double CosineSim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine_sim: dimension mismatch");
  }
  const double na = SquaredNorm(a);
  const double nb = SquaredNorm(b);
  if (na == 0.0 || nb == 0.0) throw DataError("cosine_sim: zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  // sqrt(x * x) == x in IEEE arithmetic, so cos(a, a) is exactly 1.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double NormalizedSim(std::span<const double> a, std::span<const double> b) {
  return (CosineSim(a, b) + 1.0) / 2.0;
}

FeatureVector UpdatePrototype(std::span<const double> p_old,
                              std::span<const double> f_avg) {
  FeatureVector out(p_old.begin(), p_old.end());
  if (IsZero(f_avg)) return out;
  const double s = NormalizedSim(p_old, f_avg);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = p_old[i] * (1.0 - s) + f_avg[i] * s;
  }
  return out;
}

std::vector<double> MakeSoftLabel(std::span<const double> feature,
                                  const PrototypeStore& store,
                                  double temperature) {
  if (!(temperature > 0.0)) {
    throw ConfigError("soft label temperature must be > 0");
  }
  std::vector<double> sims(store.class_ids.size());
  for (std::size_t k = 0; k < sims.size(); ++k) {
    sims[k] = CosineSim(feature, store.prototypes[k]) / temperature;
  }
  std::vector<double> u = Softmax(sims);
  u.push_back(0.0);
  return u;
}

void BatchUpdate(PrototypeStore* store,
                 std::span<const Detection> high_confidence,
                 std::span<const LabeledFeature> supervised,
                 PrototypeAveraging averaging) {
  const std::size_t n = store->class_ids.size();
  if (n == 0) return;
  const std::size_t dim = store->prototypes[0].size();
  std::vector<FeatureVector> sum(n, FeatureVector(dim, 0.0));
  std::vector<int> count(n, 0);
  auto add = [&](int class_id, const FeatureVector& f) {
    const int k = store->IndexOf(class_id);
    if (k < 0) {
      throw DataError("batch_update: no prototype for class " +
                      std::to_string(class_id));
    }
    if (f.size() != dim) throw DataError("batch_update: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) sum[k][i] += f[i];
    ++count[k];
  };
  for (const Detection& d : high_confidence) add(d.class_id, d.feature);
  for (const LabeledFeature& s : supervised) add(s.class_id, s.feature);

  for (std::size_t k = 0; k < n; ++k) {
    if (count[k] == 0) continue;
    FeatureVector f_avg(dim);
    if (averaging == PrototypeAveraging::kCumulative) {
      for (std::size_t i = 0; i < dim; ++i) store->evidence_sum[k][i] += sum[k][i];
      store->evidence_count[k] += count[k];
      for (std::size_t i = 0; i < dim; ++i) {
        f_avg[i] = store->evidence_sum[k][i] / store->evidence_count[k];
      }
    } else {
      for (std::size_t i = 0; i < dim; ++i) f_avg[i] = sum[k][i] / count[k];
    }
    if (IsZero(f_avg)) continue;
    store->prototypes[k] = UpdatePrototype(store->prototypes[k], f_avg);
    ++store->update_counts[k];
  }
}

std::uint64_t StoreFingerprint(const PrototypeStore& store) {
  Fingerprint fp;
  for (std::size_t k = 0; k < store.class_ids.size(); ++k) {
    fp.Add(static_cast<std::int64_t>(store.class_ids[k]));
    fp.Add(store.prototypes[k]);
  }
  return fp.value();
}

}  // namespace protottl
