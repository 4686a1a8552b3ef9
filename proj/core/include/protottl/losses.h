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

// Training objectives with analytic gradients.
//
// Each loss is built in two steps: targets are derived from ground truth or
// pseudo-labels (this is where label assignment and proposal refinement
// happen) and are then held fixed while the loss and its gradient are
// evaluated. The gradient is therefore exact for the loss as a function of
// the parameters at fixed targets.
//
// Reduction: every head is averaged over the proposals it applies to, then
// the heads are summed. Smooth-L1 uses beta = 1 and sums the 4 coordinates.

#ifndef PROTOTTL_LOSSES_H_
#define PROTOTTL_LOSSES_H_

#include <span>
#include <vector>

#include "protottl/detector.h"
#include "protottl/postprocess.h"
#include "protottl/worldgen.h"

namespace protottl {

inline constexpr double kKlProbFloor = 1e-12;
// Refined boxes thinner than this on either axis get no RoI regression target.
inline constexpr double kMinRoiSide = 0.01;

// Fixed training target for one proposal. Negative `objectness` or
// `class_row` mean the head ignores the proposal.
struct ProposalTarget {
  FeatureVector feature;
  int objectness = -1;
  int class_row = -1;
  bool has_rpn_reg = false;
  BoxDeltas rpn_target{};
  bool has_roi_reg = false;
  BoxDeltas roi_target{};
};

struct HeadLosses {
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double roi_cls = 0.0;
  double roi_reg = 0.0;

  double sum() const { return rpn_cls + rpn_reg + roi_cls + roi_reg; }
};

struct LossResult {
  double loss = 0.0;
  HeadLosses heads;
  DetectorParams grads;
  // KL terms whose student probability was clamped at kKlProbFloor.
  int clamped = 0;
};

// Targets for every proposal of every scene: objectness and class from
// AssignLabels, proposal-stage regression relative to the proposal and
// RoI-stage regression relative to the proposal refined by `params`.
// The refined box is treated as a constant.
std::vector<ProposalTarget> BuildSupervisedTargets(
    const DetectorParams& params, std::span<const Scene> scenes,
    double match_iou);

// Pseudo-label targets for `scenes[i]` from `pseudo[i]`. Scenes without
// hard labels contribute nothing. A proposal matched to a hard box takes its
// class; one matched only to a surviving implicit candidate is foreground for
// objectness and ignored by the classifier (its class comes from the soft
// label); everything else is background. No regression targets.
std::vector<ProposalTarget> BuildPseudoTargets(
    const DetectorParams& params, std::span<const Scene> scenes,
    std::span<const PseudoLabelSet> pseudo, double match_iou);

// Differentiable core shared by the supervised and unsupervised losses.
LossResult DetectionLoss(const DetectorParams& params,
                         std::span<const ProposalTarget> targets);

LossResult SupervisedLoss(const DetectorParams& params,
                          std::span<const Scene> scenes, double match_iou);

// Only the objectness and classification heads receive gradient.
LossResult UnsupervisedLoss(const DetectorParams& params,
                            std::span<const Scene> scenes,
                            std::span<const PseudoLabelSet> pseudo,
                            double match_iou);

struct KlCandidate {
  FeatureVector feature;
  // N + 1 entries, background last.
  std::vector<double> soft_label;
};

// Mean over candidates of KL(u || v), v the student class distribution.
// Entries with u = 0 contribute nothing. Gradient w.r.t. the logits is v - u.
LossResult KlLoss(const DetectorParams& params,
                  std::span<const KlCandidate> candidates);

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.1;
};

void ValidateLossWeights(const LossWeights& w);

struct LossBreakdown {
  double l_sup = 0.0;
  double l_unsup = 0.0;
  double l_kl = 0.0;
  double l_total = 0.0;
  HeadLosses sup;
  HeadLosses unsup;
};

// l_total = l_sup + lambda1 l_unsup + lambda2 l_kl.
LossBreakdown TotalLoss(double l_sup, double l_unsup, double l_kl,
                        const LossWeights& weights);

// Same weighted sum over gradients, element-wise.
DetectorParams CombineGradients(const DetectorParams& sup,
                                const DetectorParams& unsup,
                                const DetectorParams& kl,
                                const LossWeights& weights);

}  // namespace protottl

#endif  // PROTOTTL_LOSSES_H_
