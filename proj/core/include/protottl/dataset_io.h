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

// Dataset files are JSON Lines. Line 1 is the header:
//
//   {"format":"protottl.dataset","version":1,"feature_dim":D,
//    "num_classes":C,"base_classes":[...],"novel_classes":[...],"shots":K,
//    "test_order":[...],"scenes":S}
//
// followed by exactly S scene records, one per line:
//
//   {"id":I,"split":"base|balanced|test|none",
//    "objects":[{"box":[x1,y1,x2,y2],"class_id":c,"feature":[...]}, ...],
//    "proposals":[{"box":[x1,y1,x2,y2],"feature":[...]}, ...]}
//
// Keys are always written in this order. Reals use the shortest decimal form
// that parses back to the same double, so load(save(x)) == x bit for bit.

#ifndef PROTOTTL_DATASET_IO_H_
#define PROTOTTL_DATASET_IO_H_

#include <iosfwd>
#include <string>

#include "protottl/worldgen.h"

namespace protottl {

void WriteDataset(std::ostream& out, const Dataset& dataset);

// `source` names the stream in ParseError messages.
Dataset ReadDataset(std::istream& in, const std::string& source);

void SaveDataset(const std::string& path, const Dataset& dataset);
Dataset LoadDataset(const std::string& path);

}  // namespace protottl

#endif  // PROTOTTL_DATASET_IO_H_
