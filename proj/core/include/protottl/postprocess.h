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

// Teacher post-processing: non-maximum suppression and the dual-threshold
// split of detections into hard pseudo-labels, implicit foreground
// candidates and discards.

#ifndef PROTOTTL_POSTPROCESS_H_
#define PROTOTTL_POSTPROCESS_H_

#include <vector>

#include "protottl/box.h"
#include "protottl/detection.h"

namespace protottl {

struct ThresholdConfig {
  double delta_upper = 0.9;
  double delta_lower = 0.7;
  double nms_iou = 0.5;
};

// Throws ConfigError unless 0 < delta_lower < delta_upper <= 1 and
// nms_iou in (0, 1].
void ValidateThresholds(const ThresholdConfig& cfg);

// A teacher detection whose class label has been stripped.
struct ImplicitCandidate {
  Box box;
  FeatureVector feature;
  double score = 0.0;
  int proposal_index = 0;

  friend bool operator==(const ImplicitCandidate&,
                         const ImplicitCandidate&) = default;
};

struct PseudoLabelSet {
  // score >= delta_upper
  std::vector<Detection> hard;
  // delta_lower <= score < delta_upper
  std::vector<ImplicitCandidate> implicit;
  int discarded_count = 0;
};

// Orders by descending score, ties by ascending proposal index, then by
// input position.
void SortByScore(std::vector<Detection>& dets);

// Greedy per-class suppression: a detection survives iff no higher-ranked
// surviving detection of the same class overlaps it with IoU >= nms_iou.
// Output is in SortByScore order.
std::vector<Detection> NmsClassSpecific(std::vector<Detection> dets,
                                        double nms_iou);

PseudoLabelSet PartitionPseudo(const std::vector<Detection>& dets,
                               const ThresholdConfig& cfg);

// Drops implicit candidates that overlap any hard label, or any
// higher-scored surviving candidate, with IoU >= nms_iou. Class labels play
// no role. Survivors are returned in descending score order.
std::vector<ImplicitCandidate> NmsClassAgnostic(
    std::vector<ImplicitCandidate> implicit,
    const std::vector<Detection>& hard, double nms_iou);

}  // namespace protottl

#endif  // PROTOTTL_POSTPROCESS_H_
