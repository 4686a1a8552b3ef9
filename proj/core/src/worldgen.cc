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

#include "protottl/worldgen.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "protottl/error.h"

namespace protottl {
namespace {

constexpr double kBackgroundMaxIou = 0.3;
constexpr int kJitterAttempts = 200;
constexpr int kPlacementAttempts = 200;
constexpr int kBackgroundAttempts = 5000;

std::mt19937_64 SceneRng(std::uint64_t seed, std::int64_t scene_id) {
  const auto id = static_cast<std::uint64_t>(scene_id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id),
                    static_cast<std::uint32_t>(id >> 32)};
  return std::mt19937_64(seq);
}

double Norm(const FeatureVector& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

Box RandomBox(const GeneratorConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> size(cfg.min_box_size,
                                              cfg.max_box_size);
  const double w = size(rng);
  const double h = size(rng);
  std::uniform_real_distribution<double> px(0.0, 1.0 - w);
  std::uniform_real_distribution<double> py(0.0, 1.0 - h);
  const double x1 = px(rng);
  const double y1 = py(rng);
  return {x1, y1, x1 + w, y1 + h};
}

Box JitterBox(const Box& gt, double min_iou, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> shift(-0.15, 0.15);
  std::uniform_real_distribution<double> log_scale(-0.2, 0.2);
  for (int attempt = 0; attempt < kJitterAttempts; ++attempt) {
    const BoxDeltas deltas = {shift(rng), shift(rng), log_scale(rng),
                              log_scale(rng)};
    const Box candidate = ClipBox(DecodeBox(deltas, gt));
    if (Iou(candidate, gt) >= min_iou) return candidate;
  }
  return gt;
}

FeatureVector NoisyFeature(const FeatureVector& mean, double sigma,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureVector f(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    f[i] = mean[i] + sigma * noise(rng);
  }
  return f;
}

}  // namespace

const char* SplitTagName(SplitTag tag) {
  switch (tag) {
    case SplitTag::kNone:
      return "none";
    case SplitTag::kBase:
      return "base";
    case SplitTag::kBalanced:
      return "balanced";
    case SplitTag::kTest:
      return "test";
  }
  return "none";
}

SplitTag SplitTagFromName(const std::string& name) {
  if (name == "none") return SplitTag::kNone;
  if (name == "base") return SplitTag::kBase;
  if (name == "balanced") return SplitTag::kBalanced;
  if (name == "test") return SplitTag::kTest;
  throw DataError("unknown split tag '" + name + "'");
}

void ValidateGeneratorConfig(const GeneratorConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw ConfigError("generator: " + what);
  };
  if (cfg.feature_dim < 1) fail("feature_dim must be >= 1");
  if (cfg.num_classes < 1) fail("num_classes must be >= 1");
  if (cfg.objects_per_scene < 0) fail("objects_per_scene must be >= 0");
  if (cfg.proposals_per_gt < 0) fail("proposals_per_gt must be >= 0");
  if (cfg.background_proposals < 0) fail("background_proposals must be >= 0");
  if (!(cfg.min_jitter_iou > 0.0 && cfg.min_jitter_iou < 1.0)) {
    fail("min_jitter_iou must lie in (0, 1)");
  }
  if (!(cfg.feature_noise_sigma >= 0.0)) {
    fail("feature_noise_sigma must be >= 0");
  }
  if (!(cfg.background_feature_sigma >= 0.0)) {
    fail("background_feature_sigma must be >= 0");
  }
  if (!(cfg.instance_sigma >= 0.0)) fail("instance_sigma must be >= 0");
  if (!(cfg.min_box_size > 0.0 && cfg.min_box_size <= cfg.max_box_size &&
        cfg.max_box_size < 1.0)) {
    fail("box sizes must satisfy 0 < min_box_size <= max_box_size < 1");
  }
  if (!(cfg.min_class_angle_deg >= 0.0 && cfg.min_class_angle_deg < 180.0)) {
    fail("min_class_angle_deg must lie in [0, 180)");
  }
  if (cfg.class_means.empty()) return;
  if (static_cast<int>(cfg.class_means.size()) != cfg.num_classes) {
    fail("class_means must hold one vector per class");
  }
  for (std::size_t c = 0; c < cfg.class_means.size(); ++c) {
    const FeatureVector& mean = cfg.class_means[c];
    if (static_cast<int>(mean.size()) != cfg.feature_dim) {
      fail("class mean " + std::to_string(c) + " has wrong dimension");
    }
    if (std::abs(Norm(mean) - 1.0) > 1e-9) {
      fail("class mean " + std::to_string(c) + " is not unit norm");
    }
    for (std::size_t o = 0; o < c; ++o) {
      if (cfg.class_means[o] == mean) {
        fail("class means " + std::to_string(o) + " and " + std::to_string(c) +
             " coincide");
      }
    }
  }
}

std::vector<FeatureVector> MakeClassMeans(int feature_dim, int num_classes,
                                          double min_angle_deg,
                                          std::uint64_t seed) {
  constexpr int kMaxAttempts = 100000;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double max_cos = std::cos(min_angle_deg * std::numbers::pi / 180.0);
  std::vector<FeatureVector> means;
  int attempts = 0;
  while (static_cast<int>(means.size()) < num_classes) {
    if (++attempts > kMaxAttempts) {
      throw ConfigError("cannot place " + std::to_string(num_classes) +
                        " class means in dimension " +
                        std::to_string(feature_dim) + " with minimum angle " +
                        std::to_string(min_angle_deg));
    }
    FeatureVector v(feature_dim);
    for (double& x : v) x = normal(rng);
    const double n = Norm(v);
    if (n == 0.0) continue;
    for (double& x : v) x /= n;
    const bool far_enough =
        std::all_of(means.begin(), means.end(), [&](const FeatureVector& m) {
          return std::inner_product(m.begin(), m.end(), v.begin(), 0.0) <=
                 max_cos;
        });
    if (far_enough) means.push_back(std::move(v));
  }
  return means;
}

GeneratorConfig ResolveGeneratorConfig(GeneratorConfig cfg) {
  ValidateGeneratorConfig(cfg);
  if (cfg.class_means.empty()) {
    cfg.class_means = MakeClassMeans(cfg.feature_dim, cfg.num_classes,
                                     cfg.min_class_angle_deg, cfg.seed);
  }
  ValidateGeneratorConfig(cfg);
  return cfg;
}

Scene GenerateScene(const GeneratorConfig& cfg, std::int64_t scene_id,
                    std::span<const int> class_pool) {
  ValidateGeneratorConfig(cfg);
  if (class_pool.empty()) throw DataError("generate_scene: empty class pool");
  if (cfg.class_means.empty()) {
    throw ConfigError("generate_scene: class means not resolved");
  }
  for (int c : class_pool) {
    if (c < 0 || c >= cfg.num_classes) {
      throw DataError("generate_scene: class " + std::to_string(c) +
                      " outside the class universe");
    }
  }

  std::mt19937_64 rng = SceneRng(cfg.seed, scene_id);
  std::uniform_int_distribution<std::size_t> pick(0, class_pool.size() - 1);

  Scene scene;
  scene.id = scene_id;
  scene.objects.reserve(cfg.objects_per_scene);
  std::vector<FeatureVector> centers;
  for (int i = 0; i < cfg.objects_per_scene; ++i) {
    Box box = RandomBox(cfg, rng);
    for (int attempt = 1; attempt < kPlacementAttempts; ++attempt) {
      const bool clear = std::all_of(
          scene.objects.begin(), scene.objects.end(),
          [&](const GroundTruthObject& o) {
            return Iou(o.box, box) < kBackgroundMaxIou;
          });
      if (clear) break;
      box = RandomBox(cfg, rng);
    }
    const int class_id = class_pool[pick(rng)];
    FeatureVector center = cfg.class_means[class_id];
    if (cfg.instance_sigma > 0.0) {
      center = NoisyFeature(center, cfg.instance_sigma, rng);
    }
    FeatureVector latent =
        NoisyFeature(center, cfg.feature_noise_sigma, rng);
    scene.objects.push_back({box, class_id, std::move(latent)});
    centers.push_back(std::move(center));
  }

  scene.proposals.reserve(cfg.objects_per_scene * cfg.proposals_per_gt +
                          cfg.background_proposals);
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    for (int j = 0; j < cfg.proposals_per_gt; ++j) {
      Box box = JitterBox(scene.objects[k].box, cfg.min_jitter_iou, rng);
      scene.proposals.push_back(
          {box, NoisyFeature(centers[k], cfg.feature_noise_sigma, rng)});
    }
  }

  const FeatureVector zero(cfg.feature_dim, 0.0);
  for (int j = 0; j < cfg.background_proposals; ++j) {
    bool placed = false;
    Box box;
    for (int attempt = 0; attempt < kBackgroundAttempts && !placed;
         ++attempt) {
      box = RandomBox(cfg, rng);
      placed = std::all_of(scene.objects.begin(), scene.objects.end(),
                           [&](const GroundTruthObject& o) {
                             return Iou(o.box, box) < kBackgroundMaxIou;
                           });
    }
    if (!placed) {
      throw DataError("generate_scene: cannot place background proposal in "
                      "scene " + std::to_string(scene_id));
    }
    scene.proposals.push_back(
        {box, NoisyFeature(zero, cfg.background_feature_sigma, rng)});
  }
  return scene;
}

std::vector<Scene> GeneratePool(const GeneratorConfig& cfg, int num_scenes) {
  if (num_scenes < 0) throw ConfigError("num_scenes must be >= 0");
  std::vector<int> all(cfg.num_classes);
  std::iota(all.begin(), all.end(), 0);
  std::vector<Scene> pool;
  pool.reserve(num_scenes);
  for (int i = 0; i < num_scenes; ++i) {
    pool.push_back(GenerateScene(cfg, i, all));
  }
  return pool;
}

void ValidateSplitSpec(const SplitSpec& spec) {
  if (spec.shots < 1) throw ConfigError("split: shots must be >= 1");
  if (spec.num_test_scenes < 0) {
    throw ConfigError("split: num_test_scenes must be >= 0");
  }
  std::set<int> base(spec.base_classes.begin(), spec.base_classes.end());
  if (base.size() != spec.base_classes.size()) {
    throw ConfigError("split: duplicate base class");
  }
  std::set<int> novel(spec.novel_classes.begin(), spec.novel_classes.end());
  if (novel.size() != spec.novel_classes.size()) {
    throw ConfigError("split: duplicate novel class");
  }
  for (int c : novel) {
    if (base.count(c) != 0) {
      throw ConfigError("split: class " + std::to_string(c) +
                        " is both base and novel");
    }
  }
  if (base.empty()) throw ConfigError("split: no base classes");
}

Splits MakeSplits(const std::vector<Scene>& pool, const SplitSpec& spec,
                  int proposals_per_gt) {
  ValidateSplitSpec(spec);
  if (spec.num_test_scenes > static_cast<int>(pool.size())) {
    throw DataError("make_splits: num_test_scenes exceeds pool size");
  }
  const std::set<int> base(spec.base_classes.begin(), spec.base_classes.end());
  std::set<int> all = base;
  all.insert(spec.novel_classes.begin(), spec.novel_classes.end());
  for (const Scene& s : pool) {
    for (const GroundTruthObject& o : s.objects) {
      if (all.count(o.class_id) == 0) {
        throw DataError("make_splits: scene " + std::to_string(s.id) +
                        " has object of unknown class " +
                        std::to_string(o.class_id));
      }
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<std::int64_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  Splits out;
  std::vector<bool> is_test(pool.size(), false);
  for (int i = 0; i < spec.num_test_scenes; ++i) {
    const std::int64_t idx = order[i];
    is_test[idx] = true;
    out.test_order.push_back(idx);
    Scene s = pool[idx];
    s.split = SplitTag::kTest;
    out.test.push_back(std::move(s));
  }

  std::int64_t next_id = 0;
  for (const Scene& s : pool) next_id = std::max(next_id, s.id + 1);

  struct Instance {
    std::size_t scene;
    std::size_t object;
  };
  std::vector<std::vector<Instance>> candidates(all.size());
  const std::vector<int> classes(all.begin(), all.end());
  auto class_slot = [&](int c) {
    return static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), c) - classes.begin());
  };
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (is_test[i]) continue;
    const Scene& s = pool[i];
    bool base_only = true;
    for (std::size_t j = 0; j < s.objects.size(); ++j) {
      const int c = s.objects[j].class_id;
      if (base.count(c) == 0) base_only = false;
      candidates[class_slot(c)].push_back({i, j});
    }
    if (base_only) {
      Scene b = s;
      b.split = SplitTag::kBase;
      out.base.push_back(std::move(b));
    }
  }

  for (std::size_t k = 0; k < classes.size(); ++k) {
    std::vector<Instance>& cands = candidates[k];
    if (static_cast<int>(cands.size()) < spec.shots) {
      std::ostringstream os;
      os << "make_splits: class " << classes[k] << " has " << cands.size()
         << " instances outside the test split, need " << spec.shots;
      throw DataError(os.str());
    }
    std::shuffle(cands.begin(), cands.end(), rng);
    for (int shot = 0; shot < spec.shots; ++shot) {
      const Scene& src = pool[cands[shot].scene];
      const std::size_t obj = cands[shot].object;
      Scene b;
      b.id = next_id++;
      b.split = SplitTag::kBalanced;
      b.objects.push_back(src.objects[obj]);
      const std::size_t first = obj * proposals_per_gt;
      const std::size_t bg_first = src.objects.size() * proposals_per_gt;
      if (bg_first > src.proposals.size()) {
        throw DataError("make_splits: scene " + std::to_string(src.id) +
                        " does not follow the proposal layout");
      }
      b.proposals.assign(src.proposals.begin() + first,
                         src.proposals.begin() + first + proposals_per_gt);
      b.proposals.insert(b.proposals.end(), src.proposals.begin() + bg_first,
                         src.proposals.end());
      out.balanced.push_back(std::move(b));
    }
  }
  return out;
}

std::vector<Scene> Dataset::Select(SplitTag tag) const {
  std::vector<Scene> out;
  for (const Scene& s : scenes) {
    if (s.split == tag) out.push_back(s);
  }
  return out;
}

std::vector<int> Dataset::AllClasses() const {
  std::set<int> all(base_classes.begin(), base_classes.end());
  all.insert(novel_classes.begin(), novel_classes.end());
  return {all.begin(), all.end()};
}

Dataset ToDataset(const Splits& splits, const GeneratorConfig& cfg,
                  const SplitSpec& spec) {
  Dataset d;
  d.feature_dim = cfg.feature_dim;
  d.num_classes = cfg.num_classes;
  d.base_classes = spec.base_classes;
  d.novel_classes = spec.novel_classes;
  std::sort(d.base_classes.begin(), d.base_classes.end());
  std::sort(d.novel_classes.begin(), d.novel_classes.end());
  d.shots = spec.shots;
  d.test_order = splits.test_order;
  d.scenes.reserve(splits.base.size() + splits.balanced.size() +
                   splits.test.size());
  d.scenes.insert(d.scenes.end(), splits.base.begin(), splits.base.end());
  d.scenes.insert(d.scenes.end(), splits.balanced.begin(),
                  splits.balanced.end());
  d.scenes.insert(d.scenes.end(), splits.test.begin(), splits.test.end());
  return d;
}

}  // namespace protottl
