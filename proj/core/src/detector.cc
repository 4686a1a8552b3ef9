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

#include "protottl/detector.h"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "protottl/error.h"
#include "protottl/fingerprint.h"
#include "protottl/postprocess.h"

namespace protottl {
namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void CheckBlock(const char* name, std::size_t got, std::size_t want) {
  if (got != want) {
    throw DimensionError(std::string("parameter block ") + name + " has " +
                         std::to_string(got) + " entries, expected " +
                         std::to_string(want));
  }
}

}  // namespace

std::string FingerprintHex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, value);
  return buf;
}

int DetectorParams::RowOf(int class_id) const {
  auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
  return it == class_ids.end() ? -1
                               : static_cast<int>(it - class_ids.begin());
}

std::array<ParamBlock, kNumParamBlocks> DetectorParams::Blocks() {
  return {{{"w_obj", w_obj},
           {"b_obj", b_obj},
           {"w_rpnreg", w_rpnreg},
           {"b_rpnreg", b_rpnreg},
           {"w_cls", w_cls},
           {"b_cls", b_cls},
           {"w_reg", w_reg},
           {"b_reg", b_reg}}};
}

std::array<ConstParamBlock, kNumParamBlocks> DetectorParams::Blocks() const {
  return {{{"w_obj", w_obj},
           {"b_obj", b_obj},
           {"w_rpnreg", w_rpnreg},
           {"b_rpnreg", b_rpnreg},
           {"w_cls", w_cls},
           {"b_cls", b_cls},
           {"w_reg", w_reg},
           {"b_reg", b_reg}}};
}

std::size_t DetectorParams::size() const {
  std::size_t n = 0;
  for (const ConstParamBlock& b : Blocks()) n += b.values.size();
  return n;
}

DetectorParams ZeroParams(int feature_dim, std::vector<int> class_ids) {
  if (feature_dim < 1) throw DimensionError("feature_dim must be >= 1");
  std::set<int> unique(class_ids.begin(), class_ids.end());
  if (unique.size() != class_ids.size()) {
    throw DimensionError("duplicate class id in classifier head");
  }
  const std::size_t d = feature_dim;
  const std::size_t rows = class_ids.size() + 1;
  DetectorParams p;
  p.feature_dim = feature_dim;
  p.class_ids = std::move(class_ids);
  p.w_obj.assign(d, 0.0);
  p.b_obj.assign(1, 0.0);
  p.w_rpnreg.assign(4 * d, 0.0);
  p.b_rpnreg.assign(4, 0.0);
  p.w_cls.assign(rows * d, 0.0);
  p.b_cls.assign(rows, 0.0);
  p.w_reg.assign(4 * d, 0.0);
  p.b_reg.assign(4, 0.0);
  return p;
}

DetectorParams RandomParams(int feature_dim, std::vector<int> class_ids,
                            std::uint64_t seed, double scale) {
  DetectorParams p = ZeroParams(feature_dim, std::move(class_ids));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& w : p.w_obj) w = u(rng);
  for (double& w : p.w_rpnreg) w = u(rng);
  for (double& w : p.w_cls) w = u(rng);
  for (double& w : p.w_reg) w = u(rng);
  return p;
}

void ValidateParams(const DetectorParams& p) {
  if (p.feature_dim < 1) throw DimensionError("feature_dim must be >= 1");
  const std::size_t d = p.feature_dim;
  const std::size_t rows = p.class_ids.size() + 1;
  CheckBlock("w_obj", p.w_obj.size(), d);
  CheckBlock("b_obj", p.b_obj.size(), 1);
  CheckBlock("w_rpnreg", p.w_rpnreg.size(), 4 * d);
  CheckBlock("b_rpnreg", p.b_rpnreg.size(), 4);
  CheckBlock("w_cls", p.w_cls.size(), rows * d);
  CheckBlock("b_cls", p.b_cls.size(), rows);
  CheckBlock("w_reg", p.w_reg.size(), 4 * d);
  CheckBlock("b_reg", p.b_reg.size(), 4);
}

void CheckSameShape(const DetectorParams& a, const DetectorParams& b) {
  if (a.feature_dim != b.feature_dim || a.class_ids != b.class_ids) {
    throw DimensionError("parameter sets have different heads");
  }
  ValidateParams(a);
  ValidateParams(b);
}

DetectorParams ExtendClasses(const DetectorParams& params,
                             std::vector<int> class_ids) {
  ValidateParams(params);
  DetectorParams out = ZeroParams(params.feature_dim, std::move(class_ids));
  out.w_obj = params.w_obj;
  out.b_obj = params.b_obj;
  out.w_rpnreg = params.w_rpnreg;
  out.b_rpnreg = params.b_rpnreg;
  out.w_reg = params.w_reg;
  out.b_reg = params.b_reg;
  const std::size_t d = params.feature_dim;
  auto copy_row = [&](int from, int to) {
    std::copy_n(params.w_cls.begin() + from * d, d,
                out.w_cls.begin() + to * d);
    out.b_cls[to] = params.b_cls[from];
  };
  for (int k = 0; k < params.num_classes(); ++k) {
    const int row = out.RowOf(params.class_ids[k]);
    if (row < 0) {
      throw DimensionError("extended head drops class " +
                           std::to_string(params.class_ids[k]));
    }
    copy_row(k, row);
  }
  copy_row(params.background_row(), out.background_row());
  return out;
}

double Logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

HeadOutputs ForwardOne(const DetectorParams& params,
                       std::span<const double> feature) {
  const std::size_t d = params.feature_dim;
  if (feature.size() != d) {
    throw DimensionError("feature has dimension " +
                         std::to_string(feature.size()) + ", detector expects " +
                         std::to_string(d));
  }
  HeadOutputs out;
  out.objectness_logit = Dot(params.w_obj, feature) + params.b_obj[0];
  out.objectness = Logistic(out.objectness_logit);
  const std::span<const double> w_rpnreg(params.w_rpnreg);
  const std::span<const double> w_reg(params.w_reg);
  for (std::size_t r = 0; r < 4; ++r) {
    out.rpn_deltas[r] =
        Dot(w_rpnreg.subspan(r * d, d), feature) + params.b_rpnreg[r];
    out.roi_deltas[r] = Dot(w_reg.subspan(r * d, d), feature) + params.b_reg[r];
  }
  const std::size_t rows = params.class_ids.size() + 1;
  const std::span<const double> w_cls(params.w_cls);
  out.class_logits.resize(rows);
  for (std::size_t k = 0; k < rows; ++k) {
    out.class_logits[k] = Dot(w_cls.subspan(k * d, d), feature) + params.b_cls[k];
  }
  out.class_probs = Softmax(out.class_logits);
  return out;
}

std::vector<HeadOutputs> Forward(const DetectorParams& params,
                                 std::span<const Proposal> proposals) {
  ValidateParams(params);
  std::vector<HeadOutputs> out;
  out.reserve(proposals.size());
  for (const Proposal& p : proposals) out.push_back(ForwardOne(params, p.feature));
  return out;
}

Box RefineBox(const Box& proposal, const BoxDeltas& rpn_deltas) {
  return ClipBox(DecodeBox(rpn_deltas, proposal));
}

std::vector<Detection> Detect(const DetectorParams& params, const Scene& scene,
                              double score_floor, double nms_iou) {
  if (!(score_floor >= 0.0 && score_floor <= 1.0)) {
    throw ConfigError("score_floor must lie in [0, 1]");
  }
  const std::vector<HeadOutputs> heads = Forward(params, scene.proposals);
  std::vector<Detection> dets;
  if (params.num_classes() == 0) return dets;
  dets.reserve(heads.size());
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const HeadOutputs& h = heads[i];
    const auto fg_end = h.class_probs.begin() + params.num_classes();
    const auto best = std::max_element(h.class_probs.begin(), fg_end);
    const double score = *best;
    if (score < score_floor) continue;
    const Box refined = RefineBox(scene.proposals[i].box, h.rpn_deltas);
    Detection d;
    d.box = ClipBox(DecodeBox(h.roi_deltas, refined));
    d.class_id = params.class_ids[best - h.class_probs.begin()];
    d.score = score;
    d.feature = scene.proposals[i].feature;
    d.proposal_index = static_cast<int>(i);
    dets.push_back(std::move(d));
  }
  return NmsClassSpecific(std::move(dets), nms_iou);
}

std::vector<LabelAssignment> AssignLabels(
    std::span<const Box> proposals, std::span<const GroundTruthObject> gts,
    double match_iou) {
  if (!(match_iou > 0.0 && match_iou < 1.0)) {
    throw ConfigError("match_iou must lie in (0, 1)");
  }
  std::vector<LabelAssignment> out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best_iou = -1.0;
    int best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = Iou(proposals[i], gts[g].box);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= match_iou) {
      out[i].gt_index = best;
      out[i].class_id = gts[best].class_id;
      out[i].deltas = EncodeBox(gts[best].box, proposals[i]);
    }
  }
  return out;
}

std::vector<LabelAssignment> AssignLabels(
    std::span<const Proposal> proposals,
    std::span<const GroundTruthObject> gts, double match_iou) {
  std::vector<Box> boxes;
  boxes.reserve(proposals.size());
  for (const Proposal& p : proposals) boxes.push_back(p.box);
  return AssignLabels(std::span<const Box>(boxes), gts, match_iou);
}

void SgdStep(DetectorParams* params, const DetectorParams& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  CheckSameShape(*params, grads);
  for (const ConstParamBlock& g : grads.Blocks()) {
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      if (!std::isfinite(g.values[i])) {
        throw NumericError("non-finite gradient in head " +
                           std::string(g.name) + " at index " +
                           std::to_string(i));
      }
    }
  }
  auto blocks = params->Blocks();
  const auto gblocks = grads.Blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].values.size(); ++i) {
      blocks[b].values[i] -= lr * gblocks[b].values[i];
    }
  }
}

std::uint64_t ParamsFingerprint(const DetectorParams& params) {
  Fingerprint fp;
  fp.Add(static_cast<std::int64_t>(params.feature_dim));
  for (int c : params.class_ids) fp.Add(static_cast<std::int64_t>(c));
  for (const ConstParamBlock& b : params.Blocks()) fp.Add(b.values);
  return fp.value();
}

}  // namespace protottl
