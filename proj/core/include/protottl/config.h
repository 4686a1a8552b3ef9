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

// Flat, typed key-value configuration documents.
//
//   # comment
//   key : type = value
//   [section name]
//
// Types are int, real, bool (true/false), string and int_list (comma
// separated, possibly empty). Entries before the first section header belong
// to the unnamed global section. Every key present in a file is typed
// explicitly; keys absent from a file keep their in-code defaults.

#ifndef PROTOTTL_CONFIG_H_
#define PROTOTTL_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "protottl/ttl.h"
#include "protottl/worldgen.h"

namespace protottl {

enum class ValueType { kInt, kReal, kBool, kString, kIntList };

const char* ValueTypeName(ValueType type);

using ConfigValue = std::variant<std::int64_t, double, bool, std::string,
                                 std::vector<std::int64_t>>;

struct ConfigEntry {
  std::string key;
  ValueType type = ValueType::kInt;
  ConfigValue value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;
};

struct ConfigDocument {
  std::string source;
  // sections[0] is the global section.
  std::vector<ConfigSection> sections;
};

// Throws ParseError on malformed lines and duplicate keys within a section.
ConfigDocument ParseConfigDocument(std::istream& in, const std::string& source);

// Canonical text of a value. Reals use the shortest round-trip form.
std::string FormatValue(const ConfigValue& value);

// Everything needed to run the pipeline from world generation to
// evaluation. A single master seed derives every random stream.
struct ExperimentConfig {
  std::uint64_t seed = 0;

  GeneratorConfig world;
  int num_scenes = 1600;
  SplitSpec split;

  TrainConfig base;
  double init_scale = 0.01;
  TrainConfig finetune;

  TTLConfig ttl;

  ExperimentConfig();
};

// Fills in every seed of the sub-configs from `cfg->seed`.
void ResolveSeeds(ExperimentConfig* cfg);

// Applies one entry. Unknown keys and type mismatches are ParseErrors
// located at the entry's line.
void ApplyEntry(ExperimentConfig* cfg, const ConfigEntry& entry,
                const std::string& source);

// Applies the global section of `doc` (other sections are rejected).
void ApplyDocument(ExperimentConfig* cfg, const ConfigDocument& doc);

// Cross-field checks of every sub-config. Throws ConfigError.
void ValidateExperimentConfig(const ExperimentConfig& cfg);

// Writes every key with its type, in a fixed order.
void WriteExperimentConfig(std::ostream& out, const ExperimentConfig& cfg);

// Same keys, grouped: only the entries that affect world generation, base
// training and fine-tuning. Two configs with equal text share a M_novel.
std::string PretrainingKey(const ExperimentConfig& cfg);

ExperimentConfig ParseExperimentConfig(std::istream& in,
                                       const std::string& source);

// Reads either a config document or a run manifest (JSON with a "config"
// member holding the resolved config text).
ExperimentConfig LoadExperimentConfig(const std::string& path);

}  // namespace protottl

#endif  // PROTOTTL_CONFIG_H_
