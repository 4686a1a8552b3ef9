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

#include "protottl/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protottl/error.h"

namespace protottl {
namespace {

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

bool ValidKey(const std::string& key) {
  return !key.empty() &&
         std::all_of(key.begin(), key.end(), [](char c) {
           return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
         });
}

bool ParseInt(const std::string& text, std::int64_t* out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, *out);
  return ec == std::errc() && ptr == end;
}

ConfigValue ParseValue(ValueType type, const std::string& text,
                       const std::string& source, int line) {
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source, line,
                      "expected " + what + ", got '" + text + "'");
  };
  switch (type) {
    case ValueType::kInt: {
      std::int64_t v = 0;
      if (!ParseInt(text, &v)) throw fail("an int");
      return v;
    }
    case ValueType::kReal: {
      double v = 0.0;
      const char* end = text.data() + text.size();
      auto [ptr, ec] = std::from_chars(text.data(), end, v);
      if (ec != std::errc() || ptr != end) throw fail("a real");
      return v;
    }
    case ValueType::kBool:
      if (text == "true") return true;
      if (text == "false") return false;
      throw fail("true or false");
    case ValueType::kString:
      if (text.empty()) throw fail("a non-empty string");
      return text;
    case ValueType::kIntList: {
      std::vector<std::int64_t> list;
      if (text.empty()) return list;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::int64_t v = 0;
        if (!ParseInt(Trim(item), &v)) throw fail("a comma separated int list");
        list.push_back(v);
      }
      if (text.back() == ',') throw fail("a comma separated int list");
      return list;
    }
  }
  throw fail("a value");
}

ValueType ParseType(const std::string& name, const std::string& source,
                    int line) {
  if (name == "int") return ValueType::kInt;
  if (name == "real") return ValueType::kReal;
  if (name == "bool") return ValueType::kBool;
  if (name == "string") return ValueType::kString;
  if (name == "int_list") return ValueType::kIntList;
  throw ParseError(source, line, "unknown type '" + name + "'");
}

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One configurable field: how to read it out of and write it into an
// ExperimentConfig.
struct Field {
  const char* key;
  ValueType type;
  bool pretraining;
  std::function<ConfigValue(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const ConfigValue&)> set;
};

template <typename Ref>
Field IntField(const char* key, bool pre, Ref ref) {
  return {key, ValueType::kInt, pre,
          [ref](const ExperimentConfig& c) -> ConfigValue {
            return static_cast<std::int64_t>(ref(c));
          },
          [ref, key](ExperimentConfig& c, const ConfigValue& v) {
            const std::int64_t x = std::get<std::int64_t>(v);
            if (x < std::numeric_limits<int>::min() ||
                x > std::numeric_limits<int>::max()) {
              throw ConfigError(std::string(key) + " is out of range");
            }
            ref(c) = static_cast<int>(x);
          }};
}

template <typename Ref>
Field RealField(const char* key, bool pre, Ref ref) {
  return {key, ValueType::kReal, pre,
          [ref](const ExperimentConfig& c) -> ConfigValue { return ref(c); },
          [ref](ExperimentConfig& c, const ConfigValue& v) {
            ref(c) = std::get<double>(v);
          }};
}

template <typename Ref>
Field BoolField(const char* key, bool pre, Ref ref) {
  return {key, ValueType::kBool, pre,
          [ref](const ExperimentConfig& c) -> ConfigValue { return ref(c); },
          [ref](ExperimentConfig& c, const ConfigValue& v) {
            ref(c) = std::get<bool>(v);
          }};
}

template <typename Ref>
Field ClassListField(const char* key, Ref ref) {
  return {key, ValueType::kIntList, true,
          [ref](const ExperimentConfig& c) -> ConfigValue {
            const std::vector<int>& src = ref(c);
            return std::vector<std::int64_t>(src.begin(), src.end());
          },
          [ref, key](ExperimentConfig& c, const ConfigValue& v) {
            std::vector<int> out;
            for (std::int64_t x : std::get<std::vector<std::int64_t>>(v)) {
              if (x < 0 || x > std::numeric_limits<int>::max()) {
                throw ConfigError(std::string(key) + " holds an invalid class");
              }
              out.push_back(static_cast<int>(x));
            }
            ref(c) = std::move(out);
          }};
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"seed", ValueType::kInt, true,
       [](const ExperimentConfig& c) -> ConfigValue {
         return static_cast<std::int64_t>(c.seed);
       },
       [](ExperimentConfig& c, const ConfigValue& v) {
         const std::int64_t x = std::get<std::int64_t>(v);
         if (x < 0) throw ConfigError("seed must be >= 0");
         c.seed = static_cast<std::uint64_t>(x);
       }},
      // World.
      IntField("feature_dim", true,
               [](auto& c) -> auto& { return c.world.feature_dim; }),
      IntField("num_classes", true,
               [](auto& c) -> auto& { return c.world.num_classes; }),
      RealField("min_class_angle_deg", true,
                [](auto& c) -> auto& { return c.world.min_class_angle_deg; }),
      RealField("feature_noise_sigma", true,
                [](auto& c) -> auto& { return c.world.feature_noise_sigma; }),
      RealField("background_feature_sigma", true, [](auto& c) -> auto& {
        return c.world.background_feature_sigma;
      }),
      RealField("instance_sigma", true,
                [](auto& c) -> auto& { return c.world.instance_sigma; }),
      IntField("objects_per_scene", true,
               [](auto& c) -> auto& { return c.world.objects_per_scene; }),
      IntField("proposals_per_gt", true,
               [](auto& c) -> auto& { return c.world.proposals_per_gt; }),
      IntField("background_proposals", true,
               [](auto& c) -> auto& { return c.world.background_proposals; }),
      RealField("min_jitter_iou", true,
                [](auto& c) -> auto& { return c.world.min_jitter_iou; }),
      RealField("min_box_size", true,
                [](auto& c) -> auto& { return c.world.min_box_size; }),
      RealField("max_box_size", true,
                [](auto& c) -> auto& { return c.world.max_box_size; }),
      IntField("num_scenes", true, [](auto& c) -> auto& { return c.num_scenes; }),
      // Splits.
      ClassListField("base_classes",
                     [](auto& c) -> auto& { return c.split.base_classes; }),
      ClassListField("novel_classes",
                     [](auto& c) -> auto& { return c.split.novel_classes; }),
      IntField("shots", true, [](auto& c) -> auto& { return c.split.shots; }),
      IntField("num_test_scenes", true,
               [](auto& c) -> auto& { return c.split.num_test_scenes; }),
      // Base training and fine-tuning.
      RealField("init_scale", true, [](auto& c) -> auto& { return c.init_scale; }),
      IntField("base_epochs", true, [](auto& c) -> auto& { return c.base.epochs; }),
      RealField("base_lr", true, [](auto& c) -> auto& { return c.base.lr; }),
      IntField("base_batch_size", true,
               [](auto& c) -> auto& { return c.base.batch_size; }),
      IntField("finetune_epochs", true,
               [](auto& c) -> auto& { return c.finetune.epochs; }),
      RealField("finetune_lr", true,
                [](auto& c) -> auto& { return c.finetune.lr; }),
      IntField("finetune_batch_size", true,
               [](auto& c) -> auto& { return c.finetune.batch_size; }),
      // Test-time learning. match_iou is shared by every stage.
      RealField("match_iou", true, [](auto& c) -> auto& { return c.ttl.match_iou; }),
      RealField("delta_upper", false,
                [](auto& c) -> auto& { return c.ttl.delta_upper; }),
      RealField("delta_lower", false,
                [](auto& c) -> auto& { return c.ttl.delta_lower; }),
      RealField("lambda1", false, [](auto& c) -> auto& { return c.ttl.lambda1; }),
      RealField("lambda2", false, [](auto& c) -> auto& { return c.ttl.lambda2; }),
      RealField("ema_alpha", false,
                [](auto& c) -> auto& { return c.ttl.ema_alpha; }),
      RealField("lr", false, [](auto& c) -> auto& { return c.ttl.lr; }),
      IntField("batch_size", false,
               [](auto& c) -> auto& { return c.ttl.batch_size; }),
      RealField("nms_iou", false, [](auto& c) -> auto& { return c.ttl.nms_iou; }),
      {"strategy", ValueType::kString, false,
       [](const ExperimentConfig& c) -> ConfigValue {
         return std::string(TtlStrategyName(c.ttl.strategy));
       },
       [](ExperimentConfig& c, const ConfigValue& v) {
         c.ttl.strategy = TtlStrategyFromName(std::get<std::string>(v));
       }},
      IntField("epochs", false, [](auto& c) -> auto& { return c.ttl.epochs; }),
      RealField("feature_jitter_sigma", false,
                [](auto& c) -> auto& { return c.ttl.feature_jitter_sigma; }),
      BoolField("use_sup", false, [](auto& c) -> auto& { return c.ttl.use_sup; }),
      BoolField("soft_labels", false,
                [](auto& c) -> auto& { return c.ttl.soft_labels; }),
      BoolField("dynamic_prototypes", false,
                [](auto& c) -> auto& { return c.ttl.dynamic_prototypes; }),
      {"prototype_averaging", ValueType::kString, false,
       [](const ExperimentConfig& c) -> ConfigValue {
         return std::string(PrototypeAveragingName(c.ttl.prototype_averaging));
       },
       [](ExperimentConfig& c, const ConfigValue& v) {
         c.ttl.prototype_averaging =
             PrototypeAveragingFromName(std::get<std::string>(v));
       }},
      RealField("soft_label_temperature", false,
                [](auto& c) -> auto& { return c.ttl.soft_label_temperature; }),
      IntField("sup_batch_size", false,
               [](auto& c) -> auto& { return c.ttl.sup_batch_size; }),
      RealField("score_floor", false,
                [](auto& c) -> auto& { return c.ttl.score_floor; }),
      IntField("trend_checkpoints", false,
               [](auto& c) -> auto& { return c.ttl.trend_checkpoints; }),
      BoolField("log_prototypes", false,
                [](auto& c) -> auto& { return c.ttl.log_prototypes; }),
      RealField("eval_iou", false, [](auto& c) -> auto& { return c.ttl.eval_iou; }),
  };
  return fields;
}

void WriteFields(std::ostream& out, const ExperimentConfig& cfg,
                 bool pretraining_only) {
  for (const Field& f : Fields()) {
    if (pretraining_only && !f.pretraining) continue;
    out << f.key << " : " << ValueTypeName(f.type) << " = "
        << FormatValue(f.get(cfg)) << '\n';
  }
}

}  // namespace

const char* ValueTypeName(ValueType type) {
  switch (type) {
    case ValueType::kInt:
      return "int";
    case ValueType::kReal:
      return "real";
    case ValueType::kBool:
      return "bool";
    case ValueType::kString:
      return "string";
    case ValueType::kIntList:
      return "int_list";
  }
  return "?";
}

ConfigDocument ParseConfigDocument(std::istream& in,
                                   const std::string& source) {
  ConfigDocument doc;
  doc.source = source;
  doc.sections.push_back({"", 0, {}});
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = Trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') {
        throw ParseError(source, line, "unterminated section header");
      }
      const std::string name = Trim(text.substr(1, text.size() - 2));
      if (name.empty()) throw ParseError(source, line, "empty section name");
      doc.sections.push_back({name, line, {}});
      seen.clear();
      continue;
    }
    const auto colon = text.find(':');
    const auto eq = text.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw ParseError(source, line, "expected 'key : type = value'");
    }
    ConfigEntry e;
    e.key = Trim(text.substr(0, colon));
    if (!ValidKey(e.key)) {
      throw ParseError(source, line, "invalid key '" + e.key + "'");
    }
    if (!seen.insert(e.key).second) {
      throw ParseError(source, line, "duplicate key '" + e.key + "'");
    }
    e.type = ParseType(Trim(text.substr(colon + 1, eq - colon - 1)), source,
                       line);
    e.value = ParseValue(e.type, Trim(text.substr(eq + 1)), source, line);
    e.line = line;
    doc.sections.back().entries.push_back(std::move(e));
  }
  if (in.bad()) throw IoError("failed reading " + source);
  return doc;
}

std::string FormatValue(const ConfigValue& value) {
  struct Visitor {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      std::string s(buf, ptr);
      // Keep reals recognisable as reals.
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
    std::string operator()(const std::string& v) const { return v; }
    std::string operator()(const std::vector<std::int64_t>& v) const {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
      }
      return s;
    }
  };
  return std::visit(Visitor{}, value);
}

ExperimentConfig::ExperimentConfig() {
  for (int c = 0; c < 15; ++c) split.base_classes.push_back(c);
  for (int c = 15; c < 20; ++c) split.novel_classes.push_back(c);
  split.shots = 1;
  split.num_test_scenes = 1000;
  base.epochs = 10;
  base.lr = 0.5;
  base.batch_size = 4;
  // Deliberately short: M_novel must leave headroom for test-time learning.
  finetune.epochs = 100;
  finetune.lr = 1.0;
  finetune.batch_size = 4;
  // The TTLConfig defaults suit a long stream; this one is a few hundred
  // steps.
  ttl.lr = 0.1;
  ttl.ema_alpha = 0.999;
  ResolveSeeds(this);
}

void ResolveSeeds(ExperimentConfig* cfg) {
  const std::uint64_t s = cfg->seed;
  cfg->world.seed = SplitMix(s * 8 + 1);
  cfg->world.class_means.clear();
  cfg->split.seed = SplitMix(s * 8 + 2);
  cfg->base.seed = SplitMix(s * 8 + 3);
  cfg->finetune.seed = SplitMix(s * 8 + 4);
  cfg->ttl.seed = SplitMix(s * 8 + 5);
  cfg->finetune.match_iou = cfg->ttl.match_iou;
  cfg->base.match_iou = cfg->ttl.match_iou;
}

void ApplyEntry(ExperimentConfig* cfg, const ConfigEntry& entry,
                const std::string& source) {
  const auto& fields = Fields();
  const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) {
    return entry.key == f.key;
  });
  if (it == fields.end()) {
    throw ParseError(source, entry.line, "unknown key '" + entry.key + "'");
  }
  if (it->type != entry.type) {
    throw ParseError(source, entry.line,
                     "key '" + entry.key + "' has type " +
                         ValueTypeName(it->type) + ", not " +
                         ValueTypeName(entry.type));
  }
  try {
    it->set(*cfg, entry.value);
  } catch (const ConfigError& e) {
    throw ParseError(source, entry.line, e.what());
  }
  ResolveSeeds(cfg);
}

void ApplyDocument(ExperimentConfig* cfg, const ConfigDocument& doc) {
  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    throw ParseError(doc.source, doc.sections[i].line,
                     "sections are not allowed in an experiment config");
  }
  for (const ConfigEntry& e : doc.sections[0].entries) {
    ApplyEntry(cfg, e, doc.source);
  }
}

void ValidateExperimentConfig(const ExperimentConfig& cfg) {
  ValidateGeneratorConfig(cfg.world);
  if (cfg.num_scenes < 1) throw ConfigError("num_scenes must be >= 1");
  ValidateSplitSpec(cfg.split);
  for (int c : cfg.split.base_classes) {
    if (c >= cfg.world.num_classes) {
      throw ConfigError("base class " + std::to_string(c) +
                        " is not below num_classes");
    }
  }
  for (int c : cfg.split.novel_classes) {
    if (c >= cfg.world.num_classes) {
      throw ConfigError("novel class " + std::to_string(c) +
                        " is not below num_classes");
    }
  }
  if (cfg.split.num_test_scenes >= cfg.num_scenes) {
    throw ConfigError("num_test_scenes must be below num_scenes");
  }
  if (!(cfg.init_scale >= 0.0)) throw ConfigError("init_scale must be >= 0");
  ValidateTrainConfig(cfg.base);
  ValidateTrainConfig(cfg.finetune);
  ValidateTtlConfig(cfg.ttl);
}

void WriteExperimentConfig(std::ostream& out, const ExperimentConfig& cfg) {
  WriteFields(out, cfg, false);
}

std::string PretrainingKey(const ExperimentConfig& cfg) {
  std::ostringstream out;
  WriteFields(out, cfg, true);
  return out.str();
}

ExperimentConfig ParseExperimentConfig(std::istream& in,
                                       const std::string& source) {
  ExperimentConfig cfg;
  ApplyDocument(&cfg, ParseConfigDocument(in, source));
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, 1, std::string("bad manifest: ") + e.what());
    }
    if (!manifest.contains("config") || !manifest["config"].is_string()) {
      throw ParseError(path, 1, "manifest has no config member");
    }
    std::istringstream embedded(manifest["config"].get<std::string>());
    return ParseExperimentConfig(embedded, path + "#config");
  }
  std::istringstream doc(text);
  return ParseExperimentConfig(doc, path);
}

}  // namespace protottl
