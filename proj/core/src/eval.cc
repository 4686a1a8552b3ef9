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

#include "protottl/eval.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"
#include "protottl/error.h"

namespace protottl {
namespace {

struct Ranked {
  double score;
  bool tp;
};

double Mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

}  // namespace

std::vector<bool> MatchDetections(std::span<const Detection> dets,
                                  std::span<const GroundTruthObject> gts,
                                  double iou_thresh) {
  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    double best_iou = -1.0;
    int best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != dets[i].class_id) continue;
      const double iou = Iou(dets[i].box, gts[g].box);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_thresh) {
      taken[best] = true;
      tp[i] = true;
    }
  }
  return tp;
}

double AveragePrecision(const std::vector<bool>& tp, int num_gt,
                        bool* undefined) {
  if (num_gt < 0) throw DataError("average_precision: num_gt must be >= 0");
  if (undefined != nullptr) *undefined = num_gt == 0;
  if (num_gt == 0 || tp.empty()) return 0.0;

  std::vector<double> recall(tp.size());
  std::vector<double> precision(tp.size());
  int hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i];
    recall[i] = static_cast<double>(hits) / num_gt;
    precision[i] = static_cast<double>(hits) / (i + 1);
  }
  // Envelope: precision at i becomes the best precision at any rank >= i.
  for (std::size_t i = tp.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return std::clamp(ap, 0.0, 1.0);
}

MetricsReport Evaluate(std::span<const ScenePredictions> predictions,
                       std::span<const Scene> scenes,
                       const std::vector<int>& base_classes,
                       const std::vector<int>& novel_classes,
                       double iou_thresh) {
  std::map<std::int64_t, const ScenePredictions*> by_id;
  for (const ScenePredictions& p : predictions) {
    if (!by_id.emplace(p.scene_id, &p).second) {
      throw DataError("evaluate: duplicate predictions for scene " +
                      std::to_string(p.scene_id));
    }
  }
  if (by_id.size() != scenes.size()) {
    throw DataError("evaluate: predictions cover " +
                    std::to_string(by_id.size()) + " scenes, test set has " +
                    std::to_string(scenes.size()));
  }

  const std::set<int> novel(novel_classes.begin(), novel_classes.end());
  std::set<int> classes(base_classes.begin(), base_classes.end());
  classes.insert(novel.begin(), novel.end());

  std::map<int, std::vector<Ranked>> ranked;
  std::map<int, int> gt_count;
  for (int c : classes) {
    ranked[c];
    gt_count[c] = 0;
  }

  for (const Scene& scene : scenes) {
    auto it = by_id.find(scene.id);
    if (it == by_id.end()) {
      throw DataError("evaluate: no predictions for scene " +
                      std::to_string(scene.id));
    }
    for (const GroundTruthObject& g : scene.objects) {
      if (classes.count(g.class_id)) ++gt_count[g.class_id];
    }
    std::vector<Detection> dets = it->second->detections;
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.score > b.score;
                     });
    const std::vector<bool> tp = MatchDetections(dets, scene.objects, iou_thresh);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      auto r = ranked.find(dets[i].class_id);
      if (r == ranked.end()) continue;
      r->second.push_back({dets[i].score, tp[i]});
    }
  }

  MetricsReport report;
  report.iou_thresh = iou_thresh;
  std::vector<double> novel_aps, base_aps, all_aps;
  for (int c : classes) {
    std::vector<Ranked>& list = ranked[c];
    std::stable_sort(list.begin(), list.end(),
                     [](const Ranked& a, const Ranked& b) {
                       return a.score > b.score;
                     });
    std::vector<bool> tp;
    tp.reserve(list.size());
    for (const Ranked& r : list) tp.push_back(r.tp);
    ClassMetrics m;
    m.class_id = c;
    m.novel = novel.count(c) != 0;
    m.num_detections = static_cast<int>(list.size());
    m.num_gt = gt_count[c];
    m.ap = AveragePrecision(tp, m.num_gt, &m.undefined);
    (m.novel ? novel_aps : base_aps).push_back(m.ap);
    all_aps.push_back(m.ap);
    report.per_class.push_back(m);
  }
  report.nap = Mean(novel_aps);
  report.bap = Mean(base_aps);
  report.map = Mean(all_aps);
  return report;
}

void WriteReportJson(std::ostream& out, const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["iou_thresh"] = report.iou_thresh;
  j["nAP"] = report.nap;
  j["bAP"] = report.bap;
  j["mAP"] = report.map;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const ClassMetrics& m : report.per_class) {
    nlohmann::ordered_json c;
    c["class_id"] = m.class_id;
    c["split"] = m.novel ? "novel" : "base";
    c["ap"] = m.ap;
    c["detections"] = m.num_detections;
    c["gt"] = m.num_gt;
    c["undefined"] = m.undefined;
    classes.push_back(std::move(c));
  }
  j["classes"] = std::move(classes);
  out << j.dump(2) << '\n';
}

void WriteReportCsv(std::ostream& out, const MetricsReport& report) {
  out << "class_id,split,ap,detections,gt\n";
  char buf[32];
  for (const ClassMetrics& m : report.per_class) {
    std::snprintf(buf, sizeof(buf), "%.6f", m.ap);
    out << m.class_id << ',' << (m.novel ? "novel" : "base") << ',' << buf
        << ',' << m.num_detections << ',' << m.num_gt << '\n';
  }
}

}  // namespace protottl
