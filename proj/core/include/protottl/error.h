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

#ifndef PROTOTTL_ERROR_H_
#define PROTOTTL_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace protottl {

// Base class of every error thrown by the library. `kind()` is a short
// machine-readable tag used by the CLI for its one-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Invalid configuration values or violated configuration invariants.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
};

// Mismatched vector or matrix dimensions.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error("dimension", message) {}
};

// Malformed dataset, checkpoint, config or grid file. `line()` is 1-based;
// 0 means the position is unknown (e.g. truncated file).
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message)
      : Error("parse", source + ":" + std::to_string(line) + ": " + message),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// Violated operation preconditions on data (empty splits, missing shots,
// zero vectors where a direction is required).
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

// Non-finite gradient or loss encountered during optimisation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error("numeric", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace protottl

#endif  // PROTOTTL_ERROR_H_
