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

#include <gtest/gtest.h>

#include <sstream>

#include "protottl/error.h"

namespace protottl {
namespace {

ExperimentConfig Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseExperimentConfig(in, "test.cfg");
}

std::string Text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  WriteExperimentConfig(out, cfg);
  return out.str();
}

TEST(ConfigDocumentTest, ParsesTypesCommentsAndSections) {
  std::istringstream in(
      "# header\n"
      "a : int = -3\n"
      "b : real = 0.25   # trailing\n"
      "\n"
      "[variant x]\n"
      "c : bool = true\n"
      "d : string = one-batch\n"
      "e : int_list = 1, 2,3\n"
      "f : int_list =\n");
  const ConfigDocument doc = ParseConfigDocument(in, "doc");
  ASSERT_EQ(doc.sections.size(), 2u);
  EXPECT_EQ(std::get<std::int64_t>(doc.sections[0].entries[0].value), -3);
  EXPECT_EQ(std::get<double>(doc.sections[0].entries[1].value), 0.25);
  EXPECT_EQ(doc.sections[1].name, "variant x");
  EXPECT_EQ(doc.sections[1].line, 5);
  EXPECT_TRUE(std::get<bool>(doc.sections[1].entries[0].value));
  EXPECT_EQ(std::get<std::string>(doc.sections[1].entries[1].value), "one-batch");
  EXPECT_EQ(std::get<std::vector<std::int64_t>>(doc.sections[1].entries[2].value),
            (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_TRUE(
      std::get<std::vector<std::int64_t>>(doc.sections[1].entries[3].value).empty());
}

void ExpectParseErrorAt(const std::string& text, std::size_t line) {
  try {
    Parse(text);
    FAIL() << "expected ParseError for: " << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
  }
}

TEST(ConfigDocumentTest, Errors) {
  ExpectParseErrorAt("seed : int = 1\nlr real 0.1\n", 2);
  ExpectParseErrorAt("seed : int = 1\nseed : int = 2\n", 2);
  ExpectParseErrorAt("bogus_key : int = 1\n", 1);
  ExpectParseErrorAt("lr : int = 1\n", 1);
  ExpectParseErrorAt("\nlr : real = abc\n", 2);
  ExpectParseErrorAt("use_sup : bool = yes\n", 1);
  ExpectParseErrorAt("strategy : string = two-epochs\n", 1);
  ExpectParseErrorAt("[variant a]\nlr : real = 0.1\n", 1);
}

TEST(ConfigTest, DefaultsAreValid) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(ValidateExperimentConfig(cfg));
  EXPECT_EQ(cfg.ttl.delta_upper, 0.9);
  EXPECT_EQ(cfg.ttl.delta_lower, 0.7);
  EXPECT_EQ(cfg.ttl.lambda1, 0.5);
  EXPECT_EQ(cfg.ttl.lambda2, 0.1);
  EXPECT_EQ(cfg.ttl.batch_size, 2);
  EXPECT_EQ(cfg.ttl.epochs, 1);
}

TEST(ConfigTest, ValidationRejectsInvertedThresholds) {
  ExperimentConfig cfg = Parse("delta_lower : real = 0.95\n");
  EXPECT_THROW(ValidateExperimentConfig(cfg), ConfigError);
}

TEST(ConfigTest, RoundTripIsByteIdentical) {
  ExperimentConfig cfg = Parse(
      "seed : int = 7\n"
      "lr : real = 0.0012345678901234567\n"
      "novel_classes : int_list = 17,18,19\n"
      "base_classes : int_list = 0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16\n"
      "strategy : string = one-batch\n"
      "soft_labels : bool = false\n");
  const std::string text = Text(cfg);
  const ExperimentConfig again = Parse(text);
  EXPECT_EQ(Text(again), text);
  EXPECT_EQ(again.ttl.lr, cfg.ttl.lr);
  EXPECT_EQ(again.ttl.strategy, TtlStrategy::kOneBatch);
  EXPECT_EQ(again.split.novel_classes, (std::vector<int>{17, 18, 19}));
}

TEST(ConfigTest, SeedDerivesSubSeeds) {
  const ExperimentConfig a = Parse("seed : int = 1\n");
  const ExperimentConfig b = Parse("seed : int = 2\n");
  EXPECT_NE(a.world.seed, b.world.seed);
  EXPECT_NE(a.ttl.seed, b.ttl.seed);
  EXPECT_NE(a.world.seed, a.split.seed);
  EXPECT_EQ(Parse("seed : int = 1\n").ttl.seed, a.ttl.seed);
}

TEST(ConfigTest, PretrainingKeyIgnoresTtlFields) {
  const ExperimentConfig a = Parse("lr : real = 0.3\n");
  const ExperimentConfig b = Parse("delta_upper : real = 0.95\n");
  const ExperimentConfig c = Parse("finetune_epochs : int = 7\n");
  EXPECT_EQ(PretrainingKey(a), PretrainingKey(b));
  EXPECT_NE(PretrainingKey(a), PretrainingKey(c));
}

TEST(FormatValueTest, RealsAlwaysLookReal) {
  EXPECT_EQ(FormatValue(1.0), "1.0");
  EXPECT_EQ(FormatValue(0.1), "0.1");
  EXPECT_EQ(FormatValue(std::int64_t{3}), "3");
  EXPECT_EQ(FormatValue(std::vector<std::int64_t>{1, 2}), "1,2");
  EXPECT_EQ(FormatValue(true), "true");
}

}  // namespace
}  // namespace protottl
