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

// Text checkpoint format, one item per line:
//
//   protottl.checkpoint 1
//   feature_dim <d>
//   class_ids <n> <id>...
//   <block> <count> <hexfloat>...     (one line per parameter block, in
//                                      DetectorParams::Blocks() order)
//
// Values are C99 hexadecimal floats, so load(save(p)) == p bit for bit.

#ifndef PROTOTTL_CHECKPOINT_H_
#define PROTOTTL_CHECKPOINT_H_

#include <iosfwd>
#include <string>

#include "protottl/detector.h"

namespace protottl {

void WriteCheckpoint(std::ostream& out, const DetectorParams& params);
DetectorParams ReadCheckpoint(std::istream& in, const std::string& source);

void SaveCheckpoint(const std::string& path, const DetectorParams& params);
DetectorParams LoadCheckpoint(const std::string& path);

}  // namespace protottl

#endif  // PROTOTTL_CHECKPOINT_H_
