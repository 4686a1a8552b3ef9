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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace protottl {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "protottl");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "protottl_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream cfg(root_ / "small.cfg");
    cfg << "num_scenes : int = 200\n"
           "num_test_scenes : int = 20\n"
           "finetune_epochs : int = 30\n";
    cfg.close();
    ASSERT_EQ(Cli({"gen-data", "--config", Path("small.cfg"), "--out",
                   Path("data")}).code, 0);
    ASSERT_EQ(Cli({"train-base", "--config", Path("small.cfg"), "--data",
                   Path("data/dataset.jsonl"), "--out", Path("base")}).code, 0);
    ASSERT_EQ(Cli({"finetune", "--config", Path("small.cfg"), "--data",
                   Path("data/dataset.jsonl"), "--init",
                   Path("base/m_base.ckpt"), "--out", Path("novel")}).code, 0);
  }

  static std::string Path(const std::string& rel) { return (root_ / rel).string(); }

  std::vector<std::string> TtlArgs(const std::string& out) {
    return {"ttl", "--config", Path("small.cfg"), "--data",
            Path("data/dataset.jsonl"), "--init", Path("novel/m_novel.ckpt"),
            "--out", Path(out)};
  }

  static fs::path root_;
};

fs::path CliTest::root_;

TEST_F(CliTest, TtlWritesEveryOutput) {
  auto args = TtlArgs("ttl_a");
  args.insert(args.end(), {"--strategy", "one-epoch"});
  const Outcome o = Cli(args);
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"manifest.json", "predictions.jsonl", "runlog.jsonl",
                        "report.json", "report.csv", "teacher.ckpt",
                        "student.ckpt"}) {
    EXPECT_TRUE(fs::exists(root_ / "ttl_a" / f)) << f;
  }
}

TEST_F(CliTest, RerunIsByteIdentical) {
  ASSERT_EQ(Cli(TtlArgs("ttl_b1")).code, 0);
  ASSERT_EQ(Cli(TtlArgs("ttl_b2")).code, 0);
  for (const char* f : {"predictions.jsonl", "runlog.jsonl", "report.json",
                        "report.csv", "teacher.ckpt", "student.ckpt"}) {
    EXPECT_EQ(Slurp(root_ / "ttl_b1" / f), Slurp(root_ / "ttl_b2" / f)) << f;
  }
}

TEST_F(CliTest, ManifestReproducesRun) {
  ASSERT_EQ(Cli(TtlArgs("ttl_c1")).code, 0);
  const Outcome o = Cli({"ttl", "--config", Path("ttl_c1/manifest.json"),
                         "--data", Path("data/dataset.jsonl"), "--init",
                         Path("novel/m_novel.ckpt"), "--out", Path("ttl_c2")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(Slurp(root_ / "ttl_c1/report.json"),
            Slurp(root_ / "ttl_c2/report.json"));
  EXPECT_EQ(Slurp(root_ / "ttl_c1/teacher.ckpt"),
            Slurp(root_ / "ttl_c2/teacher.ckpt"));
}

TEST_F(CliTest, InvertedThresholdsFailBeforeAnyOutput) {
  std::ofstream bad(root_ / "bad.cfg");
  bad << "delta_upper : real = 0.9\ndelta_lower : real = 0.95\n";
  bad.close();
  auto args = TtlArgs("ttl_bad");
  args[2] = Path("bad.cfg");
  const Outcome o = Cli(args);
  EXPECT_EQ(o.code, cli::kUsageError);
  EXPECT_EQ(o.err.rfind("error: kind=config", 0), 0u) << o.err;
  EXPECT_EQ(std::count(o.err.begin(), o.err.end(), '\n'), 1);
  EXPECT_FALSE(fs::exists(root_ / "ttl_bad"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Cli({"ttl", "--bogus"}).code, cli::kUsageError);
  EXPECT_EQ(Cli({"nope"}).code, cli::kUsageError);
  auto args = TtlArgs("ttl_s");
  args.insert(args.end(), {"--strategy", "two-epoch"});
  EXPECT_EQ(Cli(args).code, cli::kUsageError);
  EXPECT_FALSE(fs::exists(root_ / "ttl_s"));
}

TEST_F(CliTest, MissingInputIsRuntimeError) {
  auto args = TtlArgs("ttl_m");
  args[4] = Path("does/not/exist.jsonl");
  const Outcome o = Cli(args);
  EXPECT_NE(o.code, 0);
  EXPECT_FALSE(fs::exists(root_ / "ttl_m"));
}

TEST_F(CliTest, InputsAreNotModified) {
  const std::string before = Slurp(root_ / "novel/m_novel.ckpt");
  ASSERT_EQ(Cli(TtlArgs("ttl_d")).code, 0);
  EXPECT_EQ(Slurp(root_ / "novel/m_novel.ckpt"), before);
}

TEST_F(CliTest, EvalAndAblate) {
  Outcome o = Cli({"eval", "--config", Path("small.cfg"), "--data",
                   Path("data/dataset.jsonl"), "--init",
                   Path("novel/m_novel.ckpt"), "--out", Path("eval")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(root_ / "eval/report.csv"));

  std::ofstream grid(root_ / "t.grid");
  grid << "seeds : int_list = 0\n"
          "[variant upper_0.95]\ndelta_upper : real = 0.95\n"
          "[variant upper_0.90]\n"
          "[variant upper_0.85]\ndelta_upper : real = 0.85\n"
          "[variant lower_0.8]\ndelta_lower : real = 0.8\n"
          "[variant lower_0.7]\n"
          "[variant lower_0.6]\ndelta_lower : real = 0.6\n";
  grid.close();
  o = Cli({"ablate", "--config", Path("small.cfg"), "--grid", Path("t.grid"),
           "--data", Path("data/dataset.jsonl"), "--out", Path("ablate")});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string csv = Slurp(root_ / "ablate/ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

}  // namespace
}  // namespace protottl
