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

#include "protottl/checkpoint.h"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "protottl/error.h"

namespace protottl {
namespace {

constexpr char kMagic[] = "protottl.checkpoint";
constexpr int kVersion = 1;

class LineReader {
 public:
  LineReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  // Reads the next line and checks its leading keyword.
  std::vector<std::string> Next(const std::string& keyword) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw ParseError(source_, line_ + 1, "expected '" + keyword + "'");
    }
    ++line_;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(std::move(t));
    if (tokens.empty() || tokens[0] != keyword) {
      Fail("expected '" + keyword + "'");
    }
    return tokens;
  }

  [[noreturn]] void Fail(const std::string& message) const {
    throw ParseError(source_, line_, message);
  }

  long long Integer(const std::string& token) const {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(token.c_str(), &end, 10);
    if (errno != 0 || end == token.c_str() || *end != '\0') {
      Fail("bad integer '" + token + "'");
    }
    return v;
  }

  double Real(const std::string& token) const {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (errno != 0 || end == token.c_str() || *end != '\0' ||
        !std::isfinite(v)) {
      Fail("bad real '" + token + "'");
    }
    return v;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace

void WriteCheckpoint(std::ostream& out, const DetectorParams& params) {
  ValidateParams(params);
  out << kMagic << ' ' << kVersion << '\n';
  out << "feature_dim " << params.feature_dim << '\n';
  out << "class_ids " << params.class_ids.size();
  for (int c : params.class_ids) out << ' ' << c;
  out << '\n';
  char buf[64];
  for (const ConstParamBlock& b : params.Blocks()) {
    out << b.name << ' ' << b.values.size();
    for (double v : b.values) {
      std::snprintf(buf, sizeof(buf), "%a", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

DetectorParams ReadCheckpoint(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  auto magic = reader.Next(kMagic);
  if (magic.size() != 2 || reader.Integer(magic[1]) != kVersion) {
    reader.Fail("unsupported checkpoint version");
  }
  auto dim = reader.Next("feature_dim");
  if (dim.size() != 2) reader.Fail("feature_dim takes one value");
  const long long d = reader.Integer(dim[1]);
  if (d < 1) reader.Fail("feature_dim must be >= 1");

  auto ids = reader.Next("class_ids");
  if (ids.size() < 2) reader.Fail("class_ids needs a count");
  const long long n = reader.Integer(ids[1]);
  if (n < 0 || static_cast<long long>(ids.size()) != n + 2) {
    reader.Fail("class_ids count does not match entries");
  }
  std::vector<int> class_ids;
  for (long long i = 0; i < n; ++i) {
    class_ids.push_back(static_cast<int>(reader.Integer(ids[i + 2])));
  }

  DetectorParams params;
  try {
    params = ZeroParams(static_cast<int>(d), class_ids);
  } catch (const Error& e) {
    reader.Fail(e.what());
  }
  for (ParamBlock& b : params.Blocks()) {
    auto tokens = reader.Next(std::string(b.name));
    if (tokens.size() < 2) reader.Fail("missing count");
    const long long count = reader.Integer(tokens[1]);
    if (count != static_cast<long long>(b.values.size()) ||
        tokens.size() != b.values.size() + 2) {
      reader.Fail("block " + std::string(b.name) + " expects " +
                  std::to_string(b.values.size()) + " values");
    }
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      b.values[i] = reader.Real(tokens[i + 2]);
    }
  }
  std::string rest;
  while (std::getline(in, rest)) {
    if (!rest.empty()) {
      throw ParseError(source, reader.line() + 1, "trailing data");
    }
  }
  return params;
}

void SaveCheckpoint(const std::string& path, const DetectorParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  WriteCheckpoint(out, params);
  if (!out) throw IoError("write failed: " + path);
}

DetectorParams LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return ReadCheckpoint(in, path);
}

}  // namespace protottl
