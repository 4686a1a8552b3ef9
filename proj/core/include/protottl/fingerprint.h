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

#ifndef PROTOTTL_FINGERPRINT_H_
#define PROTOTTL_FINGERPRINT_H_

#include <cstdint>
#include <cstring>
#include <span>
#include <string>

namespace protottl {

// 64-bit FNV-1a, stable across platforms with the same double layout.
class Fingerprint {
 public:
  void Add(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= bytes[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void Add(std::int64_t v) { Add(&v, sizeof(v)); }
  void Add(std::span<const double> values) {
    Add(values.data(), values.size_bytes());
  }

  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

// 16 lowercase hex digits.
std::string FingerprintHex(std::uint64_t value);

}  // namespace protottl

#endif  // PROTOTTL_FINGERPRINT_H_
