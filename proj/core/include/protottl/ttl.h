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

// Training pipeline: base training, few-shot fine-tuning and mean-teacher
// test-time learning.
//
// Test-time learning keeps a student and a teacher, both initialised from
// the fine-tuned detector. For every test batch the teacher predicts, its
// detections are split into hard pseudo-labels and implicit foreground
// candidates, the student takes one SGD step on
//
//   L_sup (a sampled K-shot batch) + lambda1 L_unsup (hard pseudo-labels)
//     + lambda2 L_KL (prototype soft labels on implicit candidates)
//
// and the teacher follows the student by an exponential moving average.

#ifndef PROTOTTL_TTL_H_
#define PROTOTTL_TTL_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protottl/detection.h"
#include "protottl/detector.h"
#include "protottl/error.h"
#include "protottl/eval.h"
#include "protottl/losses.h"
#include "protottl/prototypes.h"
#include "protottl/worldgen.h"

namespace protottl {

struct TrainConfig {
  int epochs = 10;
  double lr = 0.1;
  int batch_size = 4;
  double match_iou = 0.5;
  std::uint64_t seed = 0;
};

void ValidateTrainConfig(const TrainConfig& cfg);

// Thrown when a loss or gradient stops being finite. Carries the last
// parameters for which everything was finite.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& message, DetectorParams last_finite)
      : NumericError(message), last_finite_(std::move(last_finite)) {}

  const DetectorParams& last_finite() const { return last_finite_; }

 private:
  DetectorParams last_finite_;
};

// Mini-batch SGD on the supervised loss, scenes shuffled per epoch.
DetectorParams TrainSupervised(DetectorParams params,
                               std::span<const Scene> scenes,
                               const TrainConfig& cfg);

// M_init -> M_base: classifier over `base_classes` plus background.
DetectorParams TrainBase(const DetectorParams& init,
                         std::span<const Scene> d_base,
                         const TrainConfig& cfg);

// M_base -> M_novel: adds zero rows for the classes in `all_classes` that
// M_base lacks, then fine-tunes every head on D_balanced.
DetectorParams FinetuneNovel(const DetectorParams& m_base,
                             std::span<const Scene> d_balanced,
                             const std::vector<int>& all_classes,
                             const TrainConfig& cfg);

// teacher = alpha teacher + (1 - alpha) student, element-wise.
void EmaUpdate(DetectorParams* teacher, const DetectorParams& student,
               double alpha);

enum class TtlStrategy { kOneEpoch, kOneBatch };

const char* TtlStrategyName(TtlStrategy s);
TtlStrategy TtlStrategyFromName(const std::string& name);

const char* PrototypeAveragingName(PrototypeAveraging a);
PrototypeAveraging PrototypeAveragingFromName(const std::string& name);

struct TTLConfig {
  double delta_upper = 0.9;
  double delta_lower = 0.7;
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  double ema_alpha = 0.9996;
  double lr = 0.00125;
  int batch_size = 2;
  double nms_iou = 0.5;
  double match_iou = 0.5;
  TtlStrategy strategy = TtlStrategy::kOneEpoch;
  int epochs = 1;
  std::uint64_t seed = 0;
  // Gaussian noise added to proposal features of every training input, seen
  // identically by student and teacher.
  double feature_jitter_sigma = 0.0;

  // Component switches used by the ablations.
  bool use_sup = true;
  bool soft_labels = true;
  bool dynamic_prototypes = true;
  PrototypeAveraging prototype_averaging = PrototypeAveraging::kPerBatch;
  double soft_label_temperature = 1.0;
  // K-shot scenes drawn per step for L_sup.
  int sup_batch_size = 2;
  // Detections below this score are dropped before NMS.
  double score_floor = 0.05;
  // One-epoch runs re-evaluate the teacher on the whole test set at this many
  // evenly spaced iterations (0 disables).
  int trend_checkpoints = 0;
  bool log_prototypes = false;
  // IoU threshold of the evaluation run on the final predictions.
  double eval_iou = 0.5;

  ThresholdConfig thresholds() const {
    return {delta_upper, delta_lower, nms_iou};
  }
  LossWeights weights() const { return {lambda1, lambda2}; }
};

void ValidateTtlConfig(const TTLConfig& cfg);

struct ClassSplit {
  std::vector<int> base;
  std::vector<int> novel;
};

struct IterationRecord {
  int iteration = 0;
  int epoch = 0;
  LossBreakdown losses;
  int hard = 0;
  int implicit = 0;
  int implicit_kept = 0;
  int discarded = 0;
  int kl_clamped = 0;
  std::uint64_t prototype_fingerprint = 0;
  std::uint64_t teacher_fingerprint = 0;
  std::uint64_t student_fingerprint = 0;
  std::optional<PrototypeStore> prototypes;
};

struct TrendPoint {
  int iteration = 0;
  double nap = 0.0;
  double bap = 0.0;
  double map = 0.0;
};

struct RunLog {
  std::vector<IterationRecord> iterations;
  std::vector<TrendPoint> trend;
  MetricsReport final_report;
};

struct TtlResult {
  DetectorParams teacher;
  DetectorParams student;
  // One entry per test scene, in test-set order.
  std::vector<ScenePredictions> predictions;
  RunLog log;
};

// Support features (ground-truth latent features of D_balanced objects)
// grouped by class.
std::map<int, std::vector<FeatureVector>> SupportFeatures(
    std::span<const Scene> d_balanced);

// Frozen-detector predictions for every scene.
std::vector<ScenePredictions> PredictAll(const DetectorParams& params,
                                         std::span<const Scene> scenes,
                                         double score_floor, double nms_iou);

TtlResult RunTtl(const DetectorParams& m_novel, std::span<const Scene> d_test,
                 std::span<const Scene> d_balanced, const ClassSplit& split,
                 const TTLConfig& cfg);

// One JSON object per iteration, then one per trend point.
void WriteRunLog(std::ostream& out, const RunLog& log);

}  // namespace protottl

#endif  // PROTOTTL_TTL_H_
