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

#include "protottl/postprocess.h"

#include <algorithm>
#include <sstream>

#include "protottl/error.h"

namespace protottl {

void ValidateThresholds(const ThresholdConfig& cfg) {
  if (!(cfg.delta_lower > 0.0 && cfg.delta_lower < cfg.delta_upper &&
        cfg.delta_upper <= 1.0)) {
    std::ostringstream os;
    os << "thresholds must satisfy 0 < delta_lower < delta_upper <= 1, got "
       << "delta_lower=" << cfg.delta_lower
       << " delta_upper=" << cfg.delta_upper;
    throw ConfigError(os.str());
  }
  if (!(cfg.nms_iou > 0.0 && cfg.nms_iou <= 1.0)) {
    throw ConfigError("nms_iou must lie in (0, 1]");
  }
}

void SortByScore(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.proposal_index < b.proposal_index;
                   });
}

std::vector<Detection> NmsClassSpecific(std::vector<Detection> dets,
                                        double nms_iou) {
  SortByScore(dets);
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (Detection& d : dets) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
          return k.class_id == d.class_id && Iou(k.box, d.box) >= nms_iou;
        });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

PseudoLabelSet PartitionPseudo(const std::vector<Detection>& dets,
                               const ThresholdConfig& cfg) {
  ValidateThresholds(cfg);
  PseudoLabelSet out;
  for (const Detection& d : dets) {
    if (d.score >= cfg.delta_upper) {
      out.hard.push_back(d);
    } else if (d.score >= cfg.delta_lower) {
      out.implicit.push_back({d.box, d.feature, d.score, d.proposal_index});
    } else {
      ++out.discarded_count;
    }
  }
  return out;
}

std::vector<ImplicitCandidate> NmsClassAgnostic(
    std::vector<ImplicitCandidate> implicit,
    const std::vector<Detection>& hard, double nms_iou) {
  std::stable_sort(implicit.begin(), implicit.end(),
                   [](const ImplicitCandidate& a, const ImplicitCandidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.proposal_index < b.proposal_index;
                   });
  std::vector<ImplicitCandidate> kept;
  for (ImplicitCandidate& c : implicit) {
    const bool by_hard =
        std::any_of(hard.begin(), hard.end(), [&](const Detection& h) {
          return Iou(h.box, c.box) >= nms_iou;
        });
    if (by_hard) continue;
    const bool by_kept = std::any_of(
        kept.begin(), kept.end(), [&](const ImplicitCandidate& k) {
          return Iou(k.box, c.box) >= nms_iou;
        });
    if (!by_kept) kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace protottl
