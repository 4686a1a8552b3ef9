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

#ifndef PROTOTTL_DETECTION_H_
#define PROTOTTL_DETECTION_H_

#include <cstdint>
#include <vector>

#include "protottl/box.h"
#include "protottl/worldgen.h"

namespace protottl {

// A scored, classed box. `feature` is the feature of the proposal it was
// decoded from and `proposal_index` its position in the scene.
struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;
  FeatureVector feature;
  int proposal_index = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ScenePredictions {
  std::int64_t scene_id = 0;
  std::vector<Detection> detections;

  friend bool operator==(const ScenePredictions&,
                         const ScenePredictions&) = default;
};

}  // namespace protottl

#endif  // PROTOTTL_DETECTION_H_
