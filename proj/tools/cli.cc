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

#include "cli.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "protottl/checkpoint.h"
#include "protottl/config.h"
#include "protottl/dataset_io.h"
#include "protottl/error.h"
#include "protottl/eval.h"
#include "protottl/experiment.h"
#include "protottl/fingerprint.h"
#include "protottl/ttl.h"

namespace protottl::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Options {
  std::string config;
  std::string data;
  std::string init;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string grid;
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

std::string OneLine(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::string escaped;
  for (char c : s) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c;
  }
  return escaped;
}

void RequireFile(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::is_regular_file(path)) {
    throw IoError(flag + " " + path + " does not exist");
  }
}

ExperimentConfig ResolveConfig(const Options& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    RequireFile("--config", o.config);
    cfg = LoadExperimentConfig(o.config);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.strategy.empty()) cfg.ttl.strategy = TtlStrategyFromName(o.strategy);
  ResolveSeeds(&cfg);
  ValidateExperimentConfig(cfg);
  return cfg;
}

std::string ConfigText(const ExperimentConfig& cfg) {
  std::ostringstream s;
  WriteExperimentConfig(s, cfg);
  return s.str();
}

// Output directory with a record of every file written into it.
class OutDir {
 public:
  explicit OutDir(const std::string& path) : path_(path) {
    if (path.empty()) throw UsageError("--out is required");
  }

  void Create() {
    std::error_code ec;
    fs::create_directories(path_, ec);
    if (ec) throw IoError("cannot create " + path_ + ": " + ec.message());
  }

  std::string Path(const std::string& name) {
    files_.push_back(name);
    return (fs::path(path_) / name).string();
  }

  void WriteText(const std::string& name,
                 const std::function<void(std::ostream&)>& body) {
    const std::string p = Path(name);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p);
    body(f);
    if (!f) throw IoError("failed writing " + p);
  }

  const std::string& path() const { return path_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string path_;
  std::vector<std::string> files_;
};

void WriteManifest(OutDir& out, const std::string& command, const Options& o,
                   const ExperimentConfig& cfg,
                   const std::vector<std::uint64_t>& seeds,
                   const std::string& extra_key = {},
                   const std::string& extra_text = {}) {
  Json j;
  j["command"] = command;
  j["version"] = std::string("protottl ") + PROTOTTL_VERSION;
  j["config_path"] = o.config;
  j["dataset_path"] = o.data;
  j["init_checkpoint"] = o.init;
  if (!o.grid.empty()) j["grid_path"] = o.grid;
  j["out_dir"] = out.path();
  j["seeds"] = seeds;
  std::vector<std::string> outputs = out.files();
  outputs.push_back("manifest.json");
  Json checkpoints = Json::array();
  for (const std::string& f : outputs) {
    if (f.size() > 5 && f.substr(f.size() - 5) == ".ckpt") {
      checkpoints.push_back(f);
    }
  }
  j["checkpoints"] = std::move(checkpoints);
  j["outputs"] = outputs;
  j["config"] = ConfigText(cfg);
  if (!extra_key.empty()) j[extra_key] = extra_text;
  out.WriteText("manifest.json", [&](std::ostream& s) { s << j.dump(2) << '\n'; });
}

void WritePredictions(std::ostream& out,
                      const std::vector<ScenePredictions>& predictions) {
  for (const ScenePredictions& p : predictions) {
    Json j;
    j["scene_id"] = p.scene_id;
    Json dets = Json::array();
    for (const Detection& d : p.detections) {
      dets.push_back({{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                      {"class_id", d.class_id},
                      {"score", d.score},
                      {"proposal_index", d.proposal_index}});
    }
    j["detections"] = std::move(dets);
    out << j.dump() << '\n';
  }
}

void WriteReports(OutDir& out, const MetricsReport& report) {
  out.WriteText("report.json",
                [&](std::ostream& s) { WriteReportJson(s, report); });
  out.WriteText("report.csv",
                [&](std::ostream& s) { WriteReportCsv(s, report); });
}

Dataset LoadData(const Options& o, const ExperimentConfig& cfg) {
  RequireFile("--data", o.data);
  Dataset data = LoadDataset(o.data);
  CheckDatasetCompatible(cfg, data);
  return data;
}

DetectorParams LoadInit(const Options& o, const Dataset& data) {
  RequireFile("--init", o.init);
  DetectorParams params = LoadCheckpoint(o.init);
  if (params.feature_dim != data.feature_dim) {
    throw DataError("checkpoint feature_dim does not match the dataset");
  }
  return params;
}

int GenData(const Options& o, std::ostream& log) {
  const ExperimentConfig cfg = ResolveConfig(o);
  OutDir out(o.out);
  out.Create();
  const Dataset data = BuildDataset(cfg);
  SaveDataset(out.Path("dataset.jsonl"), data);
  WriteManifest(out, "gen-data", o, cfg, {cfg.seed});
  log << "wrote " << data.scenes.size() << " scenes to " << out.path() << '\n';
  return kOk;
}

int TrainBaseCmd(const Options& o, std::ostream& log) {
  const ExperimentConfig cfg = ResolveConfig(o);
  OutDir out(o.out);
  const Dataset data = LoadData(o, cfg);
  out.Create();
  const DetectorParams m_base = RunTrainBase(cfg, data);
  SaveCheckpoint(out.Path("m_base.ckpt"), m_base);
  WriteManifest(out, "train-base", o, cfg, {cfg.seed});
  log << "m_base " << FingerprintHex(ParamsFingerprint(m_base)) << '\n';
  return kOk;
}

int FinetuneCmd(const Options& o, std::ostream& log) {
  const ExperimentConfig cfg = ResolveConfig(o);
  OutDir out(o.out);
  const Dataset data = LoadData(o, cfg);
  const DetectorParams m_base = LoadInit(o, data);
  out.Create();
  const DetectorParams m_novel = RunFinetune(cfg, data, m_base);
  SaveCheckpoint(out.Path("m_novel.ckpt"), m_novel);
  WriteManifest(out, "finetune", o, cfg, {cfg.seed});
  log << "m_novel " << FingerprintHex(ParamsFingerprint(m_novel)) << '\n';
  return kOk;
}

int TtlCmd(const Options& o, std::ostream& log) {
  const ExperimentConfig cfg = ResolveConfig(o);
  OutDir out(o.out);
  const Dataset data = LoadData(o, cfg);
  const DetectorParams m_novel = LoadInit(o, data);
  out.Create();
  TtlResult r;
  try {
    r = RunTtlStage(cfg, data, m_novel);
  } catch (const DivergenceError& e) {
    SaveCheckpoint(out.Path("last_finite.ckpt"), e.last_finite());
    WriteManifest(out, "ttl", o, cfg, {cfg.seed});
    throw;
  }
  out.WriteText("predictions.jsonl",
                [&](std::ostream& s) { WritePredictions(s, r.predictions); });
  out.WriteText("runlog.jsonl",
                [&](std::ostream& s) { WriteRunLog(s, r.log); });
  WriteReports(out, r.log.final_report);
  SaveCheckpoint(out.Path("teacher.ckpt"), r.teacher);
  SaveCheckpoint(out.Path("student.ckpt"), r.student);
  WriteManifest(out, "ttl", o, cfg, {cfg.seed});
  log << "nAP50 " << r.log.final_report.nap << " bAP50 "
      << r.log.final_report.bap << " mAP50 " << r.log.final_report.map << '\n';
  return kOk;
}

int EvalCmd(const Options& o, std::ostream& log) {
  const ExperimentConfig cfg = ResolveConfig(o);
  OutDir out(o.out);
  const Dataset data = LoadData(o, cfg);
  const DetectorParams params = LoadInit(o, data);
  out.Create();
  const FrozenEval e = EvaluateFrozen(cfg, data, params);
  out.WriteText("predictions.jsonl",
                [&](std::ostream& s) { WritePredictions(s, e.predictions); });
  WriteReports(out, e.report);
  WriteManifest(out, "eval", o, cfg, {cfg.seed});
  log << "nAP50 " << e.report.nap << " bAP50 " << e.report.bap << " mAP50 "
      << e.report.map << '\n';
  return kOk;
}

int AblateCmd(const Options& o, std::ostream& log) {
  const ExperimentConfig cfg = ResolveConfig(o);
  OutDir out(o.out);
  RequireFile("--grid", o.grid);
  const AblationGrid grid = LoadGrid(o.grid);
  std::optional<Dataset> data;
  if (!o.data.empty()) data = LoadData(o, cfg);
  // Validate every cell before anything is written.
  for (const GridVariant& v : grid.variants) {
    for (std::uint64_t seed : grid.seeds) {
      const ExperimentConfig c = CellConfig(cfg, grid, v, seed);
      ValidateExperimentConfig(c);
      if (data) CheckDatasetCompatible(c, *data);
    }
  }
  out.Create();
  const AblationTable table =
      RunAblation(cfg, grid, data ? &*data : nullptr);
  out.WriteText("ablation.csv",
                [&](std::ostream& s) { WriteAblationCsv(s, table); });
  out.WriteText("ablation.json",
                [&](std::ostream& s) { WriteAblationJson(s, table); });
  std::ifstream grid_in(o.grid);
  std::stringstream grid_text;
  grid_text << grid_in.rdbuf();
  WriteManifest(out, "ablate", o, cfg, grid.seeds, "grid", grid_text.str());
  WriteAblationCsv(log, table);
  int failed = 0;
  for (const AblationCell& c : table.cells) failed += !c.ok;
  if (failed > 0) {
    throw Error("run", std::to_string(failed) + " ablation cells failed");
  }
  return kOk;
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Prototype-based soft-label test-time learning on a synthetic "
               "detection world"};
  app.set_version_flag("--version", std::string("protottl ") + PROTOTTL_VERSION);
  app.require_subcommand(1, 1);

  Options o;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config file or manifest");
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen);

  CLI::App* base = app.add_subcommand("train-base", "Train M_base on D_base");
  add_common(base);
  base->add_option("--data", o.data, "Dataset file")->required();

  CLI::App* ft = app.add_subcommand("finetune", "Fine-tune M_novel on D_balanced");
  add_common(ft);
  ft->add_option("--data", o.data, "Dataset file")->required();
  ft->add_option("--init", o.init, "M_base checkpoint")->required();

  CLI::App* ttl = app.add_subcommand("ttl", "Test-time learning on D_test");
  add_common(ttl);
  ttl->add_option("--data", o.data, "Dataset file")->required();
  ttl->add_option("--init", o.init, "M_novel checkpoint")->required();
  ttl->add_option("--strategy", o.strategy, "one-epoch or one-batch")
      ->check(CLI::IsMember({"one-epoch", "one-batch"}));

  CLI::App* ablate = app.add_subcommand("ablate", "Run a grid of variants");
  add_common(ablate);
  ablate->add_option("--grid", o.grid, "Grid file")->required();
  ablate->add_option("--data", o.data, "Shared dataset file (optional)");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on D_test");
  add_common(eval);
  eval->add_option("--data", o.data, "Dataset file")->required();
  eval->add_option("--init", o.init, "Checkpoint to evaluate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: kind=usage message=\"" << OneLine(e.what()) << "\"\n";
    return kUsageError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  if (cmd->count("--seed") > 0) o.seed = seed;

  try {
    if (cmd == gen) return GenData(o, out);
    if (cmd == base) return TrainBaseCmd(o, out);
    if (cmd == ft) return FinetuneCmd(o, out);
    if (cmd == ttl) return TtlCmd(o, out);
    if (cmd == ablate) return AblateCmd(o, out);
    return EvalCmd(o, out);
  } catch (const Error& e) {
    err << "error: kind=" << e.kind() << " message=\"" << OneLine(e.what())
        << "\"\n";
    const bool usage = e.kind() == "usage" || e.kind() == "config" ||
                       e.kind() == "parse";
    return usage ? kUsageError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: kind=internal message=\"" << OneLine(e.what()) << "\"\n";
    return kRuntimeError;
  }
}

}  // namespace protottl::cli
