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

// Synthetic detection world. A scene is a set of ground-truth boxes plus
// region proposals; each proposal carries the feature vector a backbone would
// have produced for it. Object proposals are jittered copies of their parent
// box whose features are drawn around the class mean, background proposals
// avoid every object and carry zero-mean noise features.

#ifndef PROTOTTL_WORLDGEN_H_
#define PROTOTTL_WORLDGEN_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protottl/box.h"

namespace protottl {

using FeatureVector = std::vector<double>;

struct GroundTruthObject {
  Box box;
  int class_id = 0;
  FeatureVector latent_feature;

  friend bool operator==(const GroundTruthObject&,
                         const GroundTruthObject&) = default;
};

struct Proposal {
  Box box;
  FeatureVector feature;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

enum class SplitTag { kNone, kBase, kBalanced, kTest };

const char* SplitTagName(SplitTag tag);
SplitTag SplitTagFromName(const std::string& name);

// Proposals are laid out object by object (`proposals_per_gt` each, in object
// order) followed by the background proposals.
struct Scene {
  std::int64_t id = 0;
  SplitTag split = SplitTag::kNone;
  std::vector<GroundTruthObject> objects;
  std::vector<Proposal> proposals;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct GeneratorConfig {
  int feature_dim = 8;
  int num_classes = 20;
  // One unit vector per class. Filled by MakeClassMeans when left empty.
  std::vector<FeatureVector> class_means;
  double min_class_angle_deg = 35.0;
  double feature_noise_sigma = 0.3;
  double background_feature_sigma = 0.3;
  // Per-object appearance offset shared by the object's latent feature and
  // all of its proposals. 0 puts every proposal directly around the class
  // mean.
  double instance_sigma = 0.0;
  int objects_per_scene = 3;
  int proposals_per_gt = 4;
  int background_proposals = 8;
  double min_jitter_iou = 0.6;
  double min_box_size = 0.12;
  double max_box_size = 0.35;
  std::uint64_t seed = 42;
};

// Throws ConfigError on invalid values. Empty `class_means` is allowed.
void ValidateGeneratorConfig(const GeneratorConfig& cfg);

// Seeded unit vectors with pairwise angle >= `min_angle_deg`.
std::vector<FeatureVector> MakeClassMeans(int feature_dim, int num_classes,
                                          double min_angle_deg,
                                          std::uint64_t seed);

// Returns `cfg` with class means filled in (if empty) and validated.
GeneratorConfig ResolveGeneratorConfig(GeneratorConfig cfg);

// Deterministic in (cfg.seed, scene_id). `cfg` must be resolved.
Scene GenerateScene(const GeneratorConfig& cfg, std::int64_t scene_id,
                    std::span<const int> class_pool);

// Scenes with ids [0, num_scenes) drawn from every class.
std::vector<Scene> GeneratePool(const GeneratorConfig& cfg, int num_scenes);

struct SplitSpec {
  std::vector<int> base_classes;
  std::vector<int> novel_classes;
  int shots = 1;
  int num_test_scenes = 0;
  std::uint64_t seed = 0;
};

void ValidateSplitSpec(const SplitSpec& spec);

struct Splits {
  std::vector<Scene> base;
  std::vector<Scene> balanced;
  // In streaming order.
  std::vector<Scene> test;
  // test_order[i] is the pool index of test[i].
  std::vector<std::int64_t> test_order;
};

// Holds out `num_test_scenes` pool scenes in a seeded order as D_test. The
// remaining scenes without novel objects form D_base. D_balanced has one
// single-object scene per selected instance (its own proposals plus the
// source scene's background proposals), exactly `shots` per class.
Splits MakeSplits(const std::vector<Scene>& pool, const SplitSpec& spec,
                  int proposals_per_gt);

// In-memory form of a dataset file: split metadata plus tagged scenes.
struct Dataset {
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<int> base_classes;
  std::vector<int> novel_classes;
  int shots = 0;
  std::vector<std::int64_t> test_order;
  std::vector<Scene> scenes;

  std::vector<Scene> Select(SplitTag tag) const;
  std::vector<int> AllClasses() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset ToDataset(const Splits& splits, const GeneratorConfig& cfg,
                  const SplitSpec& spec);

}  // namespace protottl

#endif  // PROTOTTL_WORLDGEN_H_
