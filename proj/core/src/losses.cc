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

#include <algorithm>
#include <cmath>

#include "protottl/error.h"

namespace protottl {
namespace {

double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double SmoothL1(double diff) {
  const double a = std::abs(diff);
  return a < 1.0 ? 0.5 * diff * diff : a - 0.5;
}

double SmoothL1Grad(double diff) { return std::clamp(diff, -1.0, 1.0); }

// out[row * d + i] += scale * feature[i]
void AddScaledRow(std::vector<double>& out, std::size_t row,
                  std::span<const double> feature, double scale) {
  const std::size_t d = feature.size();
  for (std::size_t i = 0; i < d; ++i) out[row * d + i] += scale * feature[i];
}

int RowOrThrow(const DetectorParams& params, int class_id) {
  const int row = params.RowOf(class_id);
  if (row < 0) {
    throw DataError("class " + std::to_string(class_id) +
                    " has no row in the classifier head");
  }
  return row;
}

DetectorParams ZerosLike(const DetectorParams& params) {
  return ZeroParams(params.feature_dim, params.class_ids);
}

}  // namespace

std::vector<ProposalTarget> BuildSupervisedTargets(
    const DetectorParams& params, std::span<const Scene> scenes,
    double match_iou) {
  ValidateParams(params);
  std::vector<ProposalTarget> targets;
  for (const Scene& scene : scenes) {
    const std::vector<LabelAssignment> labels =
        AssignLabels(std::span<const Proposal>(scene.proposals),
                     std::span<const GroundTruthObject>(scene.objects),
                     match_iou);
    for (std::size_t i = 0; i < scene.proposals.size(); ++i) {
      const Proposal& p = scene.proposals[i];
      const LabelAssignment& a = labels[i];
      ProposalTarget t;
      t.feature = p.feature;
      t.objectness = a.foreground() ? 1 : 0;
      t.class_row = a.foreground() ? RowOrThrow(params, a.class_id)
                                   : params.background_row();
      if (a.foreground()) {
        const Box& gt = scene.objects[a.gt_index].box;
        t.has_rpn_reg = true;
        t.rpn_target = a.deltas;
        const HeadOutputs h = ForwardOne(params, p.feature);
        const Box refined = RefineBox(p.box, h.rpn_deltas);
        if (refined.width() >= kMinRoiSide &&
            refined.height() >= kMinRoiSide) {
          t.has_roi_reg = true;
          t.roi_target = EncodeBox(gt, refined);
        }
      }
      targets.push_back(std::move(t));
    }
  }
  return targets;
}

std::vector<ProposalTarget> BuildPseudoTargets(
    const DetectorParams& params, std::span<const Scene> scenes,
    std::span<const PseudoLabelSet> pseudo, double match_iou) {
  if (scenes.size() != pseudo.size()) {
    throw DataError("pseudo-label sets do not line up with scenes");
  }
  ValidateParams(params);
  std::vector<ProposalTarget> targets;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const PseudoLabelSet& labels = pseudo[s];
    if (labels.hard.empty()) continue;
    std::vector<GroundTruthObject> boxes;
    boxes.reserve(labels.hard.size());
    for (const Detection& d : labels.hard) {
      boxes.push_back({d.box, d.class_id, {}});
    }
    const Scene& scene = scenes[s];
    const std::vector<LabelAssignment> assigned =
        AssignLabels(std::span<const Proposal>(scene.proposals),
                     std::span<const GroundTruthObject>(boxes), match_iou);
    for (std::size_t i = 0; i < scene.proposals.size(); ++i) {
      const Proposal& p = scene.proposals[i];
      ProposalTarget t;
      t.feature = p.feature;
      if (assigned[i].foreground()) {
        t.objectness = 1;
        t.class_row = RowOrThrow(params, assigned[i].class_id);
      } else {
        const bool implicit = std::any_of(
            labels.implicit.begin(), labels.implicit.end(),
            [&](const ImplicitCandidate& c) {
              return Iou(c.box, p.box) >= match_iou;
            });
        t.objectness = implicit ? 1 : 0;
        t.class_row = implicit ? -1 : params.background_row();
      }
      targets.push_back(std::move(t));
    }
  }
  return targets;
}

LossResult DetectionLoss(const DetectorParams& params,
                         std::span<const ProposalTarget> targets) {
  ValidateParams(params);
  LossResult r;
  r.grads = ZerosLike(params);
  std::size_t n_obj = 0, n_cls = 0, n_rpnreg = 0, n_roireg = 0;
  for (const ProposalTarget& t : targets) {
    n_obj += t.objectness >= 0;
    n_cls += t.class_row >= 0;
    n_rpnreg += t.has_rpn_reg;
    n_roireg += t.has_roi_reg;
  }
  const std::size_t rows = params.class_ids.size() + 1;
  DetectorParams& g = r.grads;

  for (const ProposalTarget& t : targets) {
    const std::span<const double> f(t.feature);
    const HeadOutputs h = ForwardOne(params, f);
    if (t.objectness >= 0) {
      const double y = t.objectness;
      const double z = h.objectness_logit;
      const double scale = 1.0 / n_obj;
      r.heads.rpn_cls += scale * (Softplus(z) - y * z);
      const double dz = scale * (h.objectness - y);
      AddScaledRow(g.w_obj, 0, f, dz);
      g.b_obj[0] += dz;
    }
    if (t.class_row >= 0) {
      if (static_cast<std::size_t>(t.class_row) >= rows) {
        throw DimensionError("class target row out of range");
      }
      const double scale = 1.0 / n_cls;
      const double m =
          *std::max_element(h.class_logits.begin(), h.class_logits.end());
      double z = 0.0;
      for (double l : h.class_logits) z += std::exp(l - m);
      const double lse = m + std::log(z);
      r.heads.roi_cls += scale * (lse - h.class_logits[t.class_row]);
      for (std::size_t k = 0; k < rows; ++k) {
        const double dl =
            scale * (h.class_probs[k] -
                     (static_cast<int>(k) == t.class_row ? 1.0 : 0.0));
        AddScaledRow(g.w_cls, k, f, dl);
        g.b_cls[k] += dl;
      }
    }
    if (t.has_rpn_reg) {
      const double scale = 1.0 / n_rpnreg;
      for (std::size_t c = 0; c < 4; ++c) {
        const double diff = h.rpn_deltas[c] - t.rpn_target[c];
        r.heads.rpn_reg += scale * SmoothL1(diff);
        const double dd = scale * SmoothL1Grad(diff);
        AddScaledRow(g.w_rpnreg, c, f, dd);
        g.b_rpnreg[c] += dd;
      }
    }
    if (t.has_roi_reg) {
      const double scale = 1.0 / n_roireg;
      for (std::size_t c = 0; c < 4; ++c) {
        const double diff = h.roi_deltas[c] - t.roi_target[c];
        r.heads.roi_reg += scale * SmoothL1(diff);
        const double dd = scale * SmoothL1Grad(diff);
        AddScaledRow(g.w_reg, c, f, dd);
        g.b_reg[c] += dd;
      }
    }
  }
  r.loss = r.heads.sum();
  return r;
}

LossResult SupervisedLoss(const DetectorParams& params,
                          std::span<const Scene> scenes, double match_iou) {
  const std::vector<ProposalTarget> targets =
      BuildSupervisedTargets(params, scenes, match_iou);
  return DetectionLoss(params, targets);
}

LossResult UnsupervisedLoss(const DetectorParams& params,
                            std::span<const Scene> scenes,
                            std::span<const PseudoLabelSet> pseudo,
                            double match_iou) {
  const std::vector<ProposalTarget> targets =
      BuildPseudoTargets(params, scenes, pseudo, match_iou);
  return DetectionLoss(params, targets);
}

LossResult KlLoss(const DetectorParams& params,
                  std::span<const KlCandidate> candidates) {
  ValidateParams(params);
  LossResult r;
  r.grads = ZerosLike(params);
  if (candidates.empty()) return r;
  const std::size_t rows = params.class_ids.size() + 1;
  const double scale = 1.0 / candidates.size();
  for (const KlCandidate& c : candidates) {
    if (c.soft_label.size() != rows) {
      throw DimensionError("soft label has " +
                           std::to_string(c.soft_label.size()) +
                           " entries, classifier has " + std::to_string(rows));
    }
    const std::span<const double> f(c.feature);
    const HeadOutputs h = ForwardOne(params, f);
    double kl = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      const double u = c.soft_label[k];
      if (u <= 0.0) continue;
      double v = h.class_probs[k];
      if (v < kKlProbFloor) {
        v = kKlProbFloor;
        ++r.clamped;
      }
      kl += u * (std::log(u) - std::log(v));
    }
    r.loss += scale * kl;
    for (std::size_t k = 0; k < rows; ++k) {
      const double dl = scale * (h.class_probs[k] - c.soft_label[k]);
      AddScaledRow(r.grads.w_cls, k, f, dl);
      r.grads.b_cls[k] += dl;
    }
  }
  r.heads.roi_cls = r.loss;
  return r;
}

void ValidateLossWeights(const LossWeights& w) {
  if (!(std::isfinite(w.lambda1) && w.lambda1 >= 0.0 &&
        std::isfinite(w.lambda2) && w.lambda2 >= 0.0)) {
    throw ConfigError("loss weights must be finite and >= 0");
  }
}

LossBreakdown TotalLoss(double l_sup, double l_unsup, double l_kl,
                        const LossWeights& weights) {
  ValidateLossWeights(weights);
  LossBreakdown b;
  b.l_sup = l_sup;
  b.l_unsup = l_unsup;
  b.l_kl = l_kl;
  b.l_total = l_sup + weights.lambda1 * l_unsup + weights.lambda2 * l_kl;
  return b;
}

DetectorParams CombineGradients(const DetectorParams& sup,
                                const DetectorParams& unsup,
                                const DetectorParams& kl,
                                const LossWeights& weights) {
  ValidateLossWeights(weights);
  CheckSameShape(sup, unsup);
  CheckSameShape(sup, kl);
  DetectorParams out = sup;
  auto blocks = out.Blocks();
  const auto ub = unsup.Blocks();
  const auto kb = kl.Blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].values.size(); ++i) {
      blocks[b].values[i] += weights.lambda1 * ub[b].values[i] +
                             weights.lambda2 * kb[b].values[i];
    }
  }
  return out;
}

}  // namespace protottl
