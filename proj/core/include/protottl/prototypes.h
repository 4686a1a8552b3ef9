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

// Class prototypes in feature space and the soft labels derived from them.
//
// A prototype starts as the mean of the K support features of its class and
// then moves toward the mean feature of new evidence by a step equal to the
// normalised cosine similarity between the two, so evidence pointing the
// opposite way is ignored and evidence pointing the same way is adopted.

#ifndef PROTOTTL_PROTOTYPES_H_
#define PROTOTTL_PROTOTYPES_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "protottl/detection.h"
#include "protottl/worldgen.h"

namespace protottl {

struct LabeledFeature {
  int class_id = 0;
  FeatureVector feature;
};

enum class PrototypeAveraging {
  // F_avg is the mean of the evidence seen in the current batch.
  kPerBatch,
  // F_avg is the mean of all evidence seen so far.
  kCumulative,
};

struct PrototypeStore {
  // Classifier order; soft labels follow it.
  std::vector<int> class_ids;
  std::vector<FeatureVector> prototypes;
  std::vector<int> update_counts;
  // Running evidence for PrototypeAveraging::kCumulative.
  std::vector<FeatureVector> evidence_sum;
  std::vector<int> evidence_count;

  int IndexOf(int class_id) const;
  const FeatureVector& Prototype(int class_id) const;
  int size() const { return static_cast<int>(class_ids.size()); }
};

// P^c = mean of the `shots` features of class c. Throws DataError naming
// the class when it is missing, has the wrong count, or averages to zero.
PrototypeStore InitPrototypes(
    const std::vector<int>& class_ids,
    const std::map<int, std::vector<FeatureVector>>& support, int shots);

// Throws DataError on zero vectors or dimension mismatch.
double CosineSim(std::span<const double> a, std::span<const double> b);

// (cos + 1) / 2, in [0, 1].
double NormalizedSim(std::span<const double> a, std::span<const double> b);

// P_old (1 - s) + F_avg s with s = NormalizedSim(P_old, F_avg). A zero F_avg
// carries no evidence and returns P_old.
FeatureVector UpdatePrototype(std::span<const double> p_old,
                              std::span<const double> f_avg);

// Foreground entries: softmax of cosine similarity to every prototype divided
// by `temperature`; the trailing background entry is exactly 0.
std::vector<double> MakeSoftLabel(std::span<const double> feature,
                                  const PrototypeStore& store,
                                  double temperature = 1.0);

// Averages the evidence per class (high-confidence detections plus any
// supervised features of the current batch) and updates every class that
// has some. Classes without evidence are unchanged.
void BatchUpdate(PrototypeStore* store,
                 std::span<const Detection> high_confidence,
                 std::span<const LabeledFeature> supervised,
                 PrototypeAveraging averaging = PrototypeAveraging::kPerBatch);

std::uint64_t StoreFingerprint(const PrototypeStore& store);

}  // namespace protottl

#endif  // PROTOTTL_PROTOTYPES_H_
