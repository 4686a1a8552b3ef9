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

// End-to-end pipeline stages driven by an ExperimentConfig, and the
// ablation harness that runs a grid of config variants over several seeds.

#ifndef PROTOTTL_EXPERIMENT_H_
#define PROTOTTL_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "protottl/config.h"
#include "protottl/detector.h"
#include "protottl/eval.h"
#include "protottl/ttl.h"
#include "protottl/worldgen.h"

namespace protottl {

// World generation, pool sampling and splitting.
Dataset BuildDataset(const ExperimentConfig& cfg);

// Throws DataError if `data` cannot be used with `cfg` (feature dimension,
// empty splits).
void CheckDatasetCompatible(const ExperimentConfig& cfg, const Dataset& data);

DetectorParams RunTrainBase(const ExperimentConfig& cfg, const Dataset& data);
DetectorParams RunFinetune(const ExperimentConfig& cfg, const Dataset& data,
                           const DetectorParams& m_base);
TtlResult RunTtlStage(const ExperimentConfig& cfg, const Dataset& data,
                      const DetectorParams& m_novel);

struct FrozenEval {
  std::vector<ScenePredictions> predictions;
  MetricsReport report;
};

// Inference with fixed parameters on the test split.
FrozenEval EvaluateFrozen(const ExperimentConfig& cfg, const Dataset& data,
                          const DetectorParams& params);

// Grid document: a global section with `seeds : int_list` and optionally
// `reference : string` plus shared overrides, then one `[variant NAME]`
// section per variant. A variant with `baseline : bool = true` skips
// test-time learning and evaluates M_novel as is.
struct GridVariant {
  std::string name;
  int line = 0;
  bool baseline = false;
  std::vector<ConfigEntry> overrides;
};

struct AblationGrid {
  std::string source;
  std::vector<std::uint64_t> seeds;
  std::string reference;
  std::vector<ConfigEntry> shared;
  std::vector<GridVariant> variants;
};

AblationGrid ParseGrid(std::istream& in, const std::string& source);
AblationGrid LoadGrid(const std::string& path);

// Config of one cell: `base`, then the shared overrides, the variant's
// overrides and the seed.
ExperimentConfig CellConfig(const ExperimentConfig& base,
                            const AblationGrid& grid,
                            const GridVariant& variant, std::uint64_t seed);

struct AblationCell {
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double nap = 0.0;
  double bap = 0.0;
  double map = 0.0;
  std::vector<TrendPoint> trend;
};

struct AblationRow {
  std::string variant;
  // nAP per seed, in grid seed order; empty where the cell failed.
  std::vector<std::optional<double>> nap;
  int completed = 0;
  double mean = 0.0;
  // Sample standard deviation; 0 with fewer than two completed seeds.
  double stddev = 0.0;
  // Mean over seeds of (variant - reference), over seeds where both
  // completed.
  std::optional<double> improvement;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::string reference;
  std::vector<AblationRow> rows;
  // Every cell, variant-major in grid order.
  std::vector<AblationCell> cells;
};

// Aggregates finished cells into per-variant rows.
AblationTable Aggregate(const AblationGrid& grid,
                        std::vector<AblationCell> cells);

// Runs every (variant, seed) cell. With `data` the dataset is shared by all
// cells; otherwise each cell generates its own from its config. Cells that
// share world and pre-training settings reuse one M_novel. A failing cell
// is recorded and the grid continues. Validation of every cell config
// happens before any training.
AblationTable RunAblation(const ExperimentConfig& base,
                          const AblationGrid& grid, const Dataset* data,
                          int threads = 1);

void WriteAblationCsv(std::ostream& out, const AblationTable& table);
void WriteAblationJson(std::ostream& out, const AblationTable& table);

}  // namespace protottl

#endif  // PROTOTTL_EXPERIMENT_H_
