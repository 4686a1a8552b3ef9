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

#include "protottl/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <thread>

#include "json.hpp"
#include "protottl/error.h"

namespace protottl {
namespace {

struct Pretrained {
  Dataset data;
  DetectorParams m_novel;
};

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

ClassSplit SplitOf(const Dataset& data) {
  return {data.base_classes, data.novel_classes};
}

AblationCell RunCell(const ExperimentConfig& cfg, const GridVariant& variant,
                     std::uint64_t seed, const Dataset* fixed,
                     std::map<std::string, std::shared_ptr<Pretrained>>* cache) {
  AblationCell cell;
  cell.variant = variant.name;
  cell.seed = seed;
  try {
    const std::string key = PretrainingKey(cfg);
    std::shared_ptr<Pretrained>& pre = (*cache)[key];
    if (!pre) {
      auto fresh = std::make_shared<Pretrained>();
      fresh->data = fixed != nullptr ? *fixed : BuildDataset(cfg);
      const DetectorParams m_base = RunTrainBase(cfg, fresh->data);
      fresh->m_novel = RunFinetune(cfg, fresh->data, m_base);
      pre = std::move(fresh);
    }
    if (variant.baseline) {
      const FrozenEval eval = EvaluateFrozen(cfg, pre->data, pre->m_novel);
      cell.nap = eval.report.nap;
      cell.bap = eval.report.bap;
      cell.map = eval.report.map;
    } else {
      const TtlResult r = RunTtlStage(cfg, pre->data, pre->m_novel);
      cell.nap = r.log.final_report.nap;
      cell.bap = r.log.final_report.bap;
      cell.map = r.log.final_report.map;
      cell.trend = r.log.trend;
    }
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

Dataset BuildDataset(const ExperimentConfig& cfg) {
  ValidateExperimentConfig(cfg);
  const GeneratorConfig world = ResolveGeneratorConfig(cfg.world);
  const std::vector<Scene> pool = GeneratePool(world, cfg.num_scenes);
  const Splits splits = MakeSplits(pool, cfg.split, world.proposals_per_gt);
  return ToDataset(splits, world, cfg.split);
}

void CheckDatasetCompatible(const ExperimentConfig& cfg, const Dataset& data) {
  if (data.feature_dim != cfg.world.feature_dim) {
    throw DataError("dataset feature_dim " + std::to_string(data.feature_dim) +
                    " does not match config feature_dim " +
                    std::to_string(cfg.world.feature_dim));
  }
  if (data.base_classes.empty()) throw DataError("dataset has no base classes");
  for (SplitTag tag : {SplitTag::kBase, SplitTag::kBalanced, SplitTag::kTest}) {
    const bool any = std::any_of(
        data.scenes.begin(), data.scenes.end(),
        [tag](const Scene& s) { return s.split == tag; });
    if (!any) {
      throw DataError(std::string("dataset has no ") + SplitTagName(tag) +
                      " scenes");
    }
  }
}

DetectorParams RunTrainBase(const ExperimentConfig& cfg, const Dataset& data) {
  const DetectorParams init =
      RandomParams(data.feature_dim, data.base_classes, cfg.base.seed ^ 0x1ULL,
                   cfg.init_scale);
  const std::vector<Scene> d_base = data.Select(SplitTag::kBase);
  return TrainBase(init, d_base, cfg.base);
}

DetectorParams RunFinetune(const ExperimentConfig& cfg, const Dataset& data,
                           const DetectorParams& m_base) {
  const std::vector<Scene> d_balanced = data.Select(SplitTag::kBalanced);
  return FinetuneNovel(m_base, d_balanced, data.AllClasses(), cfg.finetune);
}

TtlResult RunTtlStage(const ExperimentConfig& cfg, const Dataset& data,
                      const DetectorParams& m_novel) {
  const std::vector<Scene> d_test = data.Select(SplitTag::kTest);
  const std::vector<Scene> d_balanced = data.Select(SplitTag::kBalanced);
  return RunTtl(m_novel, d_test, d_balanced, SplitOf(data), cfg.ttl);
}

FrozenEval EvaluateFrozen(const ExperimentConfig& cfg, const Dataset& data,
                          const DetectorParams& params) {
  const std::vector<Scene> d_test = data.Select(SplitTag::kTest);
  FrozenEval out;
  out.predictions =
      PredictAll(params, d_test, cfg.ttl.score_floor, cfg.ttl.nms_iou);
  out.report = Evaluate(out.predictions, d_test, data.base_classes,
                        data.novel_classes, cfg.ttl.eval_iou);
  return out;
}

AblationGrid ParseGrid(std::istream& in, const std::string& source) {
  const ConfigDocument doc = ParseConfigDocument(in, source);
  AblationGrid grid;
  grid.source = source;
  bool have_seeds = false;
  for (const ConfigEntry& e : doc.sections[0].entries) {
    if (e.key == "seeds") {
      if (e.type != ValueType::kIntList) {
        throw ParseError(source, e.line, "seeds must be an int_list");
      }
      for (std::int64_t s : std::get<std::vector<std::int64_t>>(e.value)) {
        if (s < 0) throw ParseError(source, e.line, "seeds must be >= 0");
        grid.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      have_seeds = true;
    } else if (e.key == "reference") {
      if (e.type != ValueType::kString) {
        throw ParseError(source, e.line, "reference must be a string");
      }
      grid.reference = std::get<std::string>(e.value);
    } else {
      grid.shared.push_back(e);
    }
  }
  if (!have_seeds || grid.seeds.empty()) {
    throw ParseError(source, 1, "grid needs a non-empty 'seeds' list");
  }
  std::set<std::string> names;
  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    const ConfigSection& sec = doc.sections[i];
    const std::string prefix = "variant ";
    if (sec.name.rfind(prefix, 0) != 0 || sec.name.size() == prefix.size()) {
      throw ParseError(source, sec.line,
                       "expected a [variant NAME] section, got [" + sec.name +
                           "]");
    }
    GridVariant v;
    v.name = sec.name.substr(prefix.size());
    v.line = sec.line;
    if (!names.insert(v.name).second) {
      throw ParseError(source, sec.line, "duplicate variant '" + v.name + "'");
    }
    for (const ConfigEntry& e : sec.entries) {
      if (e.key == "baseline") {
        if (e.type != ValueType::kBool) {
          throw ParseError(source, e.line, "baseline must be a bool");
        }
        v.baseline = std::get<bool>(e.value);
      } else {
        v.overrides.push_back(e);
      }
    }
    grid.variants.push_back(std::move(v));
  }
  if (grid.variants.empty()) {
    throw ParseError(source, 1, "grid has no [variant NAME] sections");
  }
  if (!grid.reference.empty() && names.count(grid.reference) == 0) {
    throw ParseError(source, 1,
                     "reference '" + grid.reference + "' is not a variant");
  }
  // Unknown keys and type errors surface here rather than mid-run.
  ExperimentConfig probe;
  for (const ConfigEntry& e : grid.shared) ApplyEntry(&probe, e, source);
  for (const GridVariant& v : grid.variants) {
    ExperimentConfig p = probe;
    for (const ConfigEntry& e : v.overrides) ApplyEntry(&p, e, source);
  }
  return grid;
}

AblationGrid LoadGrid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid " + path);
  return ParseGrid(in, path);
}

ExperimentConfig CellConfig(const ExperimentConfig& base,
                            const AblationGrid& grid,
                            const GridVariant& variant, std::uint64_t seed) {
  ExperimentConfig cfg = base;
  for (const ConfigEntry& e : grid.shared) ApplyEntry(&cfg, e, grid.source);
  for (const ConfigEntry& e : variant.overrides) {
    ApplyEntry(&cfg, e, grid.source);
  }
  cfg.seed = seed;
  ResolveSeeds(&cfg);
  return cfg;
}

AblationTable Aggregate(const AblationGrid& grid,
                        std::vector<AblationCell> cells) {
  AblationTable table;
  table.seeds = grid.seeds;
  table.reference = grid.reference;
  const std::size_t n_seeds = grid.seeds.size();
  if (cells.size() != grid.variants.size() * n_seeds) {
    throw DataError("aggregate: cell count does not match the grid");
  }
  auto cell_at = [&](std::size_t v, std::size_t s) -> const AblationCell& {
    return cells[v * n_seeds + s];
  };
  std::optional<std::size_t> ref;
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    if (grid.variants[v].name == grid.reference) ref = v;
  }
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    AblationRow row;
    row.variant = grid.variants[v].name;
    double sum = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const AblationCell& c = cell_at(v, s);
      if (c.ok) {
        row.nap.push_back(c.nap);
        sum += c.nap;
        ++row.completed;
      } else {
        row.nap.push_back(std::nullopt);
      }
    }
    if (row.completed > 0) row.mean = sum / row.completed;
    if (row.completed > 1) {
      double ss = 0.0;
      for (const auto& x : row.nap) {
        if (x) ss += (*x - row.mean) * (*x - row.mean);
      }
      row.stddev = std::sqrt(ss / (row.completed - 1));
    }
    if (ref) {
      double diff = 0.0;
      int paired = 0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const AblationCell& a = cell_at(v, s);
        const AblationCell& r = cell_at(*ref, s);
        if (a.ok && r.ok) {
          diff += a.nap - r.nap;
          ++paired;
        }
      }
      if (paired > 0) row.improvement = diff / paired;
    }
    table.rows.push_back(std::move(row));
  }
  table.cells = std::move(cells);
  return table;
}

AblationTable RunAblation(const ExperimentConfig& base,
                          const AblationGrid& grid, const Dataset* data,
                          int threads) {
  const std::size_t n_seeds = grid.seeds.size();
  std::vector<ExperimentConfig> configs;
  for (const GridVariant& v : grid.variants) {
    for (std::uint64_t seed : grid.seeds) {
      ExperimentConfig cfg = CellConfig(base, grid, v, seed);
      ValidateExperimentConfig(cfg);
      if (data != nullptr) CheckDatasetCompatible(cfg, *data);
      configs.push_back(std::move(cfg));
    }
  }

  // One worker handles all variants of a seed so they share M_novel.
  std::vector<AblationCell> cells(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t s = next++; s < n_seeds; s = next++) {
      std::map<std::string, std::shared_ptr<Pretrained>> cache;
      for (std::size_t v = 0; v < grid.variants.size(); ++v) {
        const std::size_t idx = v * n_seeds + s;
        cells[idx] = RunCell(configs[idx], grid.variants[v], grid.seeds[s],
                             data, &cache);
      }
    }
  };
  const int n_threads =
      std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(n_seeds, 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return Aggregate(grid, std::move(cells));
}

void WriteAblationCsv(std::ostream& out, const AblationTable& table) {
  out << "variant,completed,mean_nap,std_nap,improvement";
  for (std::uint64_t s : table.seeds) out << ",nap_seed" << s;
  out << '\n';
  for (const AblationRow& r : table.rows) {
    out << r.variant << ',' << r.completed << ','
        << (r.completed ? Fixed(r.mean) : "") << ','
        << (r.completed ? Fixed(r.stddev) : "") << ','
        << (r.improvement ? Fixed(*r.improvement) : "");
    for (const auto& x : r.nap) out << ',' << (x ? Fixed(*x) : "");
    out << '\n';
  }
}

void WriteAblationJson(std::ostream& out, const AblationTable& table) {
  using Json = nlohmann::ordered_json;
  Json j;
  j["seeds"] = table.seeds;
  j["reference"] = table.reference;
  Json rows = Json::array();
  for (const AblationRow& r : table.rows) {
    Json row;
    row["variant"] = r.variant;
    row["completed"] = r.completed;
    row["mean_nap"] = r.mean;
    row["std_nap"] = r.stddev;
    row["improvement"] = r.improvement ? Json(*r.improvement) : Json(nullptr);
    Json naps = Json::array();
    for (const auto& x : r.nap) naps.push_back(x ? Json(*x) : Json(nullptr));
    row["nap"] = std::move(naps);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  Json cells = Json::array();
  for (const AblationCell& c : table.cells) {
    Json cell;
    cell["variant"] = c.variant;
    cell["seed"] = c.seed;
    cell["ok"] = c.ok;
    if (!c.ok) cell["error"] = c.error;
    cell["nAP"] = c.nap;
    cell["bAP"] = c.bap;
    cell["mAP"] = c.map;
    Json trend = Json::array();
    for (const TrendPoint& t : c.trend) {
      trend.push_back({{"iteration", t.iteration}, {"nAP", t.nap}});
    }
    cell["trend"] = std::move(trend);
    cells.push_back(std::move(cell));
  }
  j["cells"] = std::move(cells);
  out << j.dump(2) << '\n';
}

}  // namespace protottl
