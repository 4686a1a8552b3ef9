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

// Toy two-stage detector over proposal features. The proposal stage has an
// objectness logit and class-agnostic box refinement; the RoI stage has a
// softmax classifier over the foreground classes plus background and a
// class-agnostic box regressor. Every head is affine in the feature.

#ifndef PROTOTTL_DETECTOR_H_
#define PROTOTTL_DETECTOR_H_

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "protottl/box.h"
#include "protottl/detection.h"
#include "protottl/worldgen.h"

namespace protottl {

template <typename T>
struct BasicParamBlock {
  std::string_view name;
  std::span<T> values;
};
using ParamBlock = BasicParamBlock<double>;
using ConstParamBlock = BasicParamBlock<const double>;

inline constexpr int kNumParamBlocks = 8;

// Learnable weights. Matrices are row-major. Row k of the classifier scores
// dataset class `class_ids[k]`; the last row (index num_classes()) is
// background. Gradients use the same type.
struct DetectorParams {
  int feature_dim = 0;
  std::vector<int> class_ids;

  std::vector<double> w_obj;     // d
  std::vector<double> b_obj;     // 1
  std::vector<double> w_rpnreg;  // 4 x d
  std::vector<double> b_rpnreg;  // 4
  std::vector<double> w_cls;     // (N + 1) x d
  std::vector<double> b_cls;     // N + 1
  std::vector<double> w_reg;     // 4 x d
  std::vector<double> b_reg;     // 4

  int num_classes() const { return static_cast<int>(class_ids.size()); }
  int background_row() const { return num_classes(); }

  // Classifier row of `class_id`, or -1 when the head has no such class.
  int RowOf(int class_id) const;

  std::array<ParamBlock, kNumParamBlocks> Blocks();
  std::array<ConstParamBlock, kNumParamBlocks> Blocks() const;
  std::size_t size() const;

  friend bool operator==(const DetectorParams&,
                         const DetectorParams&) = default;
};

DetectorParams ZeroParams(int feature_dim, std::vector<int> class_ids);

// Weights uniform in [-scale, scale], biases zero.
DetectorParams RandomParams(int feature_dim, std::vector<int> class_ids,
                            std::uint64_t seed, double scale = 0.01);

// Throws DimensionError if `other` is not shaped like `params`.
void CheckSameShape(const DetectorParams& params, const DetectorParams& other);

// Throws DimensionError if block sizes disagree with feature_dim/class_ids.
void ValidateParams(const DetectorParams& params);

// Copy of `params` whose classifier covers `class_ids`. Existing classes keep
// their rows, new classes get zero rows, background stays last.
DetectorParams ExtendClasses(const DetectorParams& params,
                             std::vector<int> class_ids);

struct HeadOutputs {
  double objectness_logit = 0.0;
  double objectness = 0.0;
  std::vector<double> class_logits;
  std::vector<double> class_probs;
  BoxDeltas rpn_deltas{};
  BoxDeltas roi_deltas{};
};

HeadOutputs ForwardOne(const DetectorParams& params,
                       std::span<const double> feature);

std::vector<HeadOutputs> Forward(const DetectorParams& params,
                                 std::span<const Proposal> proposals);

// Numerically stable softmax.
std::vector<double> Softmax(std::span<const double> logits);

double Logistic(double z);

// Proposal box refined by the proposal-stage deltas, clipped to the scene.
Box RefineBox(const Box& proposal, const BoxDeltas& rpn_deltas);

// Decodes, scores, floors and applies class-specific NMS. Output sorted by
// descending score.
std::vector<Detection> Detect(const DetectorParams& params, const Scene& scene,
                              double score_floor, double nms_iou);

struct LabelAssignment {
  // -1 for background.
  int gt_index = -1;
  int class_id = -1;
  // Encoded ground truth relative to the proposal; zero for background.
  BoxDeltas deltas{};

  bool foreground() const { return gt_index >= 0; }
};

// Matches each box to its highest-IoU ground truth (ties to the lower index)
// when that IoU reaches `match_iou`.
std::vector<LabelAssignment> AssignLabels(
    std::span<const Box> proposals,
    std::span<const GroundTruthObject> gts, double match_iou);

std::vector<LabelAssignment> AssignLabels(
    std::span<const Proposal> proposals,
    std::span<const GroundTruthObject> gts, double match_iou);

// params -= lr * grads. Throws NumericError naming the offending head and
// leaves `params` untouched if any gradient entry is non-finite.
void SgdStep(DetectorParams* params, const DetectorParams& grads, double lr);

// FNV-1a over the raw parameter bytes and shape; used as a compact
// fingerprint in run logs.
std::uint64_t ParamsFingerprint(const DetectorParams& params);

}  // namespace protottl

#endif  // PROTOTTL_DETECTOR_H_
