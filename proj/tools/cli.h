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

#ifndef PROTOTTL_TOOLS_CLI_H_
#define PROTOTTL_TOOLS_CLI_H_

#include <iosfwd>

namespace protottl::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

// Runs one command. Failures print a single line
//   error: kind=<kind> message="<text>"
// to `err` and return a nonzero code.
int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace protottl::cli

#endif  // PROTOTTL_TOOLS_CLI_H_
