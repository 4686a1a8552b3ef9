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

// VOC-style average precision with all-point interpolation.

#ifndef PROTOTTL_EVAL_H_
#define PROTOTTL_EVAL_H_

#include <iosfwd>
#include <span>
#include <vector>

#include "protottl/detection.h"
#include "protottl/worldgen.h"

namespace protottl {

// `dets` must be sorted by descending score. Each detection claims the
// highest-IoU still unmatched ground truth of its own class, provided that
// IoU reaches `iou_thresh`; it is a true positive iff it claims one.
std::vector<bool> MatchDetections(std::span<const Detection> dets,
                                  std::span<const GroundTruthObject> gts,
                                  double iou_thresh = 0.5);

// Area under the precision envelope over recall, for detections ranked by
// descending score. With num_gt == 0 the AP is 0 and `*undefined` is set.
double AveragePrecision(const std::vector<bool>& tp, int num_gt,
                        bool* undefined = nullptr);

struct ClassMetrics {
  int class_id = 0;
  bool novel = false;
  double ap = 0.0;
  int num_detections = 0;
  int num_gt = 0;
  bool undefined = false;
};

struct MetricsReport {
  double iou_thresh = 0.5;
  std::vector<ClassMetrics> per_class;
  double nap = 0.0;
  double bap = 0.0;
  double map = 0.0;
};

// Per-class AP over `scenes` plus novel/base/all means. `predictions` must
// hold exactly one entry per scene id (any order).
MetricsReport Evaluate(std::span<const ScenePredictions> predictions,
                       std::span<const Scene> scenes,
                       const std::vector<int>& base_classes,
                       const std::vector<int>& novel_classes,
                       double iou_thresh = 0.5);

// Structured summary (JSON) and flat class,AP table.
void WriteReportJson(std::ostream& out, const MetricsReport& report);
void WriteReportCsv(std::ostream& out, const MetricsReport& report);

}  // namespace protottl

#endif  // PROTOTTL_EVAL_H_
