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

#include "protottl/ttl.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "json.hpp"
#include "protottl/fingerprint.h"
#include "protottl/postprocess.h"

namespace protottl {
namespace {

using Json = nlohmann::ordered_json;

bool AllFinite(const DetectorParams& p) {
  for (const ConstParamBlock& b : p.Blocks()) {
    for (double v : b.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Scene JitterScene(const Scene& scene, double sigma, std::mt19937_64& rng) {
  Scene out = scene;
  if (sigma <= 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Proposal& p : out.proposals) {
    for (double& x : p.feature) x += noise(rng);
  }
  return out;
}

Json HeadsToJson(const HeadLosses& h, bool with_reg) {
  Json j;
  j["rpn_cls"] = h.rpn_cls;
  if (with_reg) j["rpn_reg"] = h.rpn_reg;
  j["roi_cls"] = h.roi_cls;
  if (with_reg) j["roi_reg"] = h.roi_reg;
  return j;
}

}  // namespace

void ValidateTrainConfig(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("training epochs must be >= 0");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw ConfigError("training lr must be finite and >= 0");
  }
  if (cfg.batch_size < 1) throw ConfigError("training batch_size must be >= 1");
  if (!(cfg.match_iou > 0.0 && cfg.match_iou < 1.0)) {
    throw ConfigError("match_iou must lie in (0, 1)");
  }
}

DetectorParams TrainSupervised(DetectorParams params,
                               std::span<const Scene> scenes,
                               const TrainConfig& cfg) {
  ValidateTrainConfig(cfg);
  ValidateParams(params);
  if (cfg.epochs == 0 || scenes.empty()) return params;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(scenes.size());
  std::vector<Scene> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(scenes[order[i]]);
      const LossResult r = SupervisedLoss(params, batch, cfg.match_iou);
      if (!std::isfinite(r.loss) || !AllFinite(r.grads)) {
        throw DivergenceError("supervised training diverged in epoch " +
                                  std::to_string(epoch),
                              params);
      }
      DetectorParams next = params;
      SgdStep(&next, r.grads, cfg.lr);
      if (!AllFinite(next)) {
        throw DivergenceError("parameters became non-finite in epoch " +
                                  std::to_string(epoch),
                              params);
      }
      params = std::move(next);
    }
  }
  return params;
}

DetectorParams TrainBase(const DetectorParams& init,
                         std::span<const Scene> d_base,
                         const TrainConfig& cfg) {
  if (d_base.empty()) throw DataError("train_base: D_base is empty");
  return TrainSupervised(init, d_base, cfg);
}

DetectorParams FinetuneNovel(const DetectorParams& m_base,
                             std::span<const Scene> d_balanced,
                             const std::vector<int>& all_classes,
                             const TrainConfig& cfg) {
  if (d_balanced.empty()) {
    throw DataError("finetune_novel: D_balanced is empty");
  }
  std::vector<int> classes = all_classes;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  DetectorParams extended = ExtendClasses(m_base, classes);
  return TrainSupervised(std::move(extended), d_balanced, cfg);
}

void EmaUpdate(DetectorParams* teacher, const DetectorParams& student,
               double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("ema alpha must lie in [0, 1]");
  }
  CheckSameShape(*teacher, student);
  auto tb = teacher->Blocks();
  const auto sb = student.Blocks();
  for (std::size_t b = 0; b < tb.size(); ++b) {
    for (std::size_t i = 0; i < tb[b].values.size(); ++i) {
      tb[b].values[i] =
          alpha * tb[b].values[i] + (1.0 - alpha) * sb[b].values[i];
    }
  }
}

const char* TtlStrategyName(TtlStrategy s) {
  return s == TtlStrategy::kOneBatch ? "one-batch" : "one-epoch";
}

TtlStrategy TtlStrategyFromName(const std::string& name) {
  if (name == "one-epoch" || name == "one_epoch") return TtlStrategy::kOneEpoch;
  if (name == "one-batch" || name == "one_batch") return TtlStrategy::kOneBatch;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected one-epoch or one-batch)");
}

const char* PrototypeAveragingName(PrototypeAveraging a) {
  return a == PrototypeAveraging::kCumulative ? "cumulative" : "per-batch";
}

PrototypeAveraging PrototypeAveragingFromName(const std::string& name) {
  if (name == "per-batch" || name == "per_batch") {
    return PrototypeAveraging::kPerBatch;
  }
  if (name == "cumulative") return PrototypeAveraging::kCumulative;
  throw ConfigError("unknown prototype averaging '" + name +
                    "' (expected per-batch or cumulative)");
}

void ValidateTtlConfig(const TTLConfig& cfg) {
  ValidateThresholds(cfg.thresholds());
  ValidateLossWeights(cfg.weights());
  if (!(cfg.ema_alpha >= 0.0 && cfg.ema_alpha <= 1.0)) {
    throw ConfigError("ema_alpha must lie in [0, 1]");
  }
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw ConfigError("lr must be finite and >= 0");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.sup_batch_size < 1) throw ConfigError("sup_batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.match_iou > 0.0 && cfg.match_iou < 1.0)) {
    throw ConfigError("match_iou must lie in (0, 1)");
  }
  if (!(cfg.feature_jitter_sigma >= 0.0)) {
    throw ConfigError("feature_jitter_sigma must be >= 0");
  }
  if (!(cfg.soft_label_temperature > 0.0)) {
    throw ConfigError("soft_label_temperature must be > 0");
  }
  if (!(cfg.score_floor >= 0.0 && cfg.score_floor <= 1.0)) {
    throw ConfigError("score_floor must lie in [0, 1]");
  }
  if (cfg.trend_checkpoints < 0) {
    throw ConfigError("trend_checkpoints must be >= 0");
  }
  if (!(cfg.eval_iou > 0.0 && cfg.eval_iou < 1.0)) {
    throw ConfigError("eval_iou must lie in (0, 1)");
  }
}

std::map<int, std::vector<FeatureVector>> SupportFeatures(
    std::span<const Scene> d_balanced) {
  std::map<int, std::vector<FeatureVector>> support;
  for (const Scene& s : d_balanced) {
    for (const GroundTruthObject& o : s.objects) {
      support[o.class_id].push_back(o.latent_feature);
    }
  }
  return support;
}

std::vector<ScenePredictions> PredictAll(const DetectorParams& params,
                                         std::span<const Scene> scenes,
                                         double score_floor, double nms_iou) {
  std::vector<ScenePredictions> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) {
    out.push_back({s.id, Detect(params, s, score_floor, nms_iou)});
  }
  return out;
}

TtlResult RunTtl(const DetectorParams& m_novel, std::span<const Scene> d_test,
                 std::span<const Scene> d_balanced, const ClassSplit& split,
                 const TTLConfig& cfg) {
  ValidateTtlConfig(cfg);
  ValidateParams(m_novel);
  if (d_balanced.empty()) throw DataError("run_ttl: D_balanced is empty");

  const std::map<int, std::vector<FeatureVector>> support =
      SupportFeatures(d_balanced);
  const int shots = static_cast<int>(support.begin()->second.size());
  PrototypeStore store = InitPrototypes(m_novel.class_ids, support, shots);

  TtlResult result;
  result.teacher = m_novel;
  result.student = m_novel;
  DetectorParams& teacher = result.teacher;
  DetectorParams& student = result.student;

  std::mt19937_64 sample_rng(cfg.seed);
  std::mt19937_64 jitter_rng(cfg.seed ^ 0x5deece66dULL);
  std::uniform_int_distribution<std::size_t> pick(0, d_balanced.size() - 1);

  const std::size_t batch = cfg.batch_size;
  const std::size_t batches = (d_test.size() + batch - 1) / batch;
  const int total = static_cast<int>(batches) * cfg.epochs;
  std::set<int> checkpoints;
  if (cfg.strategy == TtlStrategy::kOneEpoch && total > 0) {
    for (int j = 1; j <= cfg.trend_checkpoints; ++j) {
      checkpoints.insert(static_cast<int>(
          (static_cast<long long>(total) * j + cfg.trend_checkpoints - 1) /
          cfg.trend_checkpoints));
    }
  }

  const ThresholdConfig thresholds = cfg.thresholds();
  const LossWeights weights = cfg.weights();
  std::vector<ScenePredictions> streamed;
  int iteration = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches; ++b) {
      ++iteration;
      const std::size_t first = b * batch;
      const std::size_t last = std::min(d_test.size(), first + batch);

      std::vector<Scene> sup_batch;
      for (int k = 0; k < cfg.sup_batch_size; ++k) {
        sup_batch.push_back(
            JitterScene(d_balanced[pick(sample_rng)], cfg.feature_jitter_sigma,
                        jitter_rng));
      }
      std::vector<Scene> test_batch;
      for (std::size_t i = first; i < last; ++i) {
        if (cfg.strategy == TtlStrategy::kOneBatch && epoch == 0) {
          streamed.push_back({d_test[i].id, Detect(teacher, d_test[i],
                                                   cfg.score_floor,
                                                   cfg.nms_iou)});
        }
        test_batch.push_back(
            JitterScene(d_test[i], cfg.feature_jitter_sigma, jitter_rng));
      }

      IterationRecord rec;
      rec.iteration = iteration;
      rec.epoch = epoch + 1;

      std::vector<PseudoLabelSet> pseudo;
      std::vector<Detection> high_confidence;
      for (const Scene& s : test_batch) {
        PseudoLabelSet p = PartitionPseudo(
            Detect(teacher, s, cfg.score_floor, cfg.nms_iou), thresholds);
        rec.hard += static_cast<int>(p.hard.size());
        rec.implicit += static_cast<int>(p.implicit.size());
        rec.discarded += p.discarded_count;
        if (cfg.soft_labels) {
          p.implicit = NmsClassAgnostic(std::move(p.implicit), p.hard,
                                        cfg.nms_iou);
        } else {
          p.discarded_count += static_cast<int>(p.implicit.size());
          p.implicit.clear();
        }
        rec.implicit_kept += static_cast<int>(p.implicit.size());
        high_confidence.insert(high_confidence.end(), p.hard.begin(),
                               p.hard.end());
        pseudo.push_back(std::move(p));
      }

      LossResult sup;
      if (cfg.use_sup) {
        sup = SupervisedLoss(student, sup_batch, cfg.match_iou);
      } else {
        sup.grads = ZeroParams(student.feature_dim, student.class_ids);
      }
      const LossResult unsup =
          UnsupervisedLoss(student, test_batch, pseudo, cfg.match_iou);

      if (cfg.dynamic_prototypes) {
        std::vector<LabeledFeature> shots_in_batch;
        for (const Scene& s : sup_batch) {
          for (const GroundTruthObject& o : s.objects) {
            shots_in_batch.push_back({o.class_id, o.latent_feature});
          }
        }
        BatchUpdate(&store, high_confidence, shots_in_batch,
                    cfg.prototype_averaging);
      }

      std::vector<KlCandidate> candidates;
      for (std::size_t i = 0; i < test_batch.size(); ++i) {
        for (const ImplicitCandidate& c : pseudo[i].implicit) {
          candidates.push_back(
              {test_batch[i].proposals[c.proposal_index].feature,
               MakeSoftLabel(c.feature, store, cfg.soft_label_temperature)});
        }
      }
      const LossResult kl = KlLoss(student, candidates);
      rec.kl_clamped = kl.clamped;

      rec.losses = TotalLoss(sup.loss, unsup.loss, kl.loss, weights);
      rec.losses.sup = sup.heads;
      rec.losses.unsup = unsup.heads;
      const DetectorParams grads =
          CombineGradients(sup.grads, unsup.grads, kl.grads, weights);
      if (!std::isfinite(rec.losses.l_total) || !AllFinite(grads)) {
        throw DivergenceError("test-time learning diverged at iteration " +
                                  std::to_string(iteration),
                              student);
      }
      DetectorParams next = student;
      SgdStep(&next, grads, cfg.lr);
      if (!AllFinite(next)) {
        throw DivergenceError("student became non-finite at iteration " +
                                  std::to_string(iteration),
                              student);
      }
      student = std::move(next);
      EmaUpdate(&teacher, student, cfg.ema_alpha);

      rec.prototype_fingerprint = StoreFingerprint(store);
      rec.teacher_fingerprint = ParamsFingerprint(teacher);
      rec.student_fingerprint = ParamsFingerprint(student);
      if (cfg.log_prototypes) rec.prototypes = store;
      result.log.iterations.push_back(std::move(rec));

      if (checkpoints.count(iteration) != 0) {
        const MetricsReport m = Evaluate(
            PredictAll(teacher, d_test, cfg.score_floor, cfg.nms_iou), d_test,
            split.base, split.novel, cfg.eval_iou);
        result.log.trend.push_back({iteration, m.nap, m.bap, m.map});
      }
    }
  }

  if (cfg.strategy == TtlStrategy::kOneBatch) {
    result.predictions = std::move(streamed);
  } else {
    result.predictions =
        PredictAll(teacher, d_test, cfg.score_floor, cfg.nms_iou);
  }
  result.log.final_report = Evaluate(result.predictions, d_test, split.base,
                                     split.novel, cfg.eval_iou);
  return result;
}

void WriteRunLog(std::ostream& out, const RunLog& log) {
  for (const IterationRecord& r : log.iterations) {
    Json j;
    j["type"] = "iteration";
    j["iteration"] = r.iteration;
    j["epoch"] = r.epoch;
    j["l_sup"] = r.losses.l_sup;
    j["l_unsup"] = r.losses.l_unsup;
    j["l_kl"] = r.losses.l_kl;
    j["l_total"] = r.losses.l_total;
    j["sup"] = HeadsToJson(r.losses.sup, true);
    j["unsup"] = HeadsToJson(r.losses.unsup, false);
    j["hard"] = r.hard;
    j["implicit"] = r.implicit;
    j["implicit_kept"] = r.implicit_kept;
    j["discarded"] = r.discarded;
    j["kl_clamped"] = r.kl_clamped;
    j["prototypes"] = FingerprintHex(r.prototype_fingerprint);
    j["teacher"] = FingerprintHex(r.teacher_fingerprint);
    j["student"] = FingerprintHex(r.student_fingerprint);
    if (r.prototypes) {
      Json protos = Json::object();
      for (std::size_t k = 0; k < r.prototypes->class_ids.size(); ++k) {
        protos[std::to_string(r.prototypes->class_ids[k])] =
            r.prototypes->prototypes[k];
      }
      j["prototype_vectors"] = std::move(protos);
    }
    out << j.dump() << '\n';
  }
  for (const TrendPoint& t : log.trend) {
    Json j;
    j["type"] = "trend";
    j["iteration"] = t.iteration;
    j["nAP"] = t.nap;
    j["bAP"] = t.bap;
    j["mAP"] = t.map;
    out << j.dump() << '\n';
  }
}

}  // namespace protottl
