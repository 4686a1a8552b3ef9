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

#include "protottl/dataset_io.h"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "protottl/error.h"

namespace protottl {
namespace {

using Json = nlohmann::ordered_json;

constexpr char kFormat[] = "protottl.dataset";
constexpr int kVersion = 1;

Json BoxToJson(const Box& b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

Box BoxFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("box must be an array of 4 numbers");
  }
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
        j[3].get<double>()};
  if (!IsValidBox(b)) throw std::invalid_argument("box violates invariants");
  return b;
}

FeatureVector FeatureFromJson(const Json& j, int dim) {
  if (!j.is_array()) throw std::invalid_argument("feature must be an array");
  FeatureVector f = j.get<FeatureVector>();
  if (static_cast<int>(f.size()) != dim) {
    throw std::invalid_argument("feature has dimension " +
                                std::to_string(f.size()) + ", expected " +
                                std::to_string(dim));
  }
  return f;
}

Json SceneToJson(const Scene& s) {
  Json objects = Json::array();
  for (const GroundTruthObject& o : s.objects) {
    Json jo;
    jo["box"] = BoxToJson(o.box);
    jo["class_id"] = o.class_id;
    jo["feature"] = o.latent_feature;
    objects.push_back(std::move(jo));
  }
  Json proposals = Json::array();
  for (const Proposal& p : s.proposals) {
    Json jp;
    jp["box"] = BoxToJson(p.box);
    jp["feature"] = p.feature;
    proposals.push_back(std::move(jp));
  }
  Json j;
  j["id"] = s.id;
  j["split"] = SplitTagName(s.split);
  j["objects"] = std::move(objects);
  j["proposals"] = std::move(proposals);
  return j;
}

Scene SceneFromJson(const Json& j, int dim, int num_classes) {
  Scene s;
  s.id = j.at("id").get<std::int64_t>();
  s.split = SplitTagFromName(j.at("split").get<std::string>());
  for (const Json& jo : j.at("objects")) {
    GroundTruthObject o;
    o.box = BoxFromJson(jo.at("box"));
    o.class_id = jo.at("class_id").get<int>();
    if (o.class_id < 0 || o.class_id >= num_classes) {
      throw std::invalid_argument("class_id out of range");
    }
    o.latent_feature = FeatureFromJson(jo.at("feature"), dim);
    s.objects.push_back(std::move(o));
  }
  for (const Json& jp : j.at("proposals")) {
    Proposal p;
    p.box = BoxFromJson(jp.at("box"));
    p.feature = FeatureFromJson(jp.at("feature"), dim);
    s.proposals.push_back(std::move(p));
  }
  return s;
}

}  // namespace

void WriteDataset(std::ostream& out, const Dataset& dataset) {
  Json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["feature_dim"] = dataset.feature_dim;
  header["num_classes"] = dataset.num_classes;
  header["base_classes"] = dataset.base_classes;
  header["novel_classes"] = dataset.novel_classes;
  header["shots"] = dataset.shots;
  header["test_order"] = dataset.test_order;
  header["scenes"] = dataset.scenes.size();
  out << header.dump() << '\n';
  for (const Scene& s : dataset.scenes) out << SceneToJson(s).dump() << '\n';
}

Dataset ReadDataset(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  Dataset d;
  std::size_t expected = 0;

  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  ++line_no;
  try {
    const Json h = Json::parse(line);
    if (h.at("format").get<std::string>() != kFormat) {
      throw std::invalid_argument("not a protottl dataset");
    }
    if (h.at("version").get<int>() != kVersion) {
      throw std::invalid_argument("unsupported version");
    }
    d.feature_dim = h.at("feature_dim").get<int>();
    d.num_classes = h.at("num_classes").get<int>();
    d.base_classes = h.at("base_classes").get<std::vector<int>>();
    d.novel_classes = h.at("novel_classes").get<std::vector<int>>();
    d.shots = h.at("shots").get<int>();
    d.test_order = h.at("test_order").get<std::vector<std::int64_t>>();
    expected = h.at("scenes").get<std::size_t>();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, line_no, std::string("header: ") + e.what());
  }

  d.scenes.reserve(expected);
  while (d.scenes.size() < expected) {
    if (!std::getline(in, line)) {
      throw ParseError(source, line_no + 1,
                       "truncated: expected " + std::to_string(expected) +
                           " scenes, found " + std::to_string(d.scenes.size()));
    }
    ++line_no;
    try {
      d.scenes.push_back(
          SceneFromJson(Json::parse(line), d.feature_dim, d.num_classes));
    } catch (const std::exception& e) {
      throw ParseError(source, line_no,
                       "scene record " + std::to_string(d.scenes.size()) +
                           ": " + e.what());
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) {
      throw ParseError(source, line_no, "trailing data after last scene");
    }
  }
  return d;
}

void SaveDataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  WriteDataset(out, dataset);
  if (!out) throw IoError("write failed: " + path);
}

Dataset LoadDataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return ReadDataset(in, path);
}

}  // namespace protottl
