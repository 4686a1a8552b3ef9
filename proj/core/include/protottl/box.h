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

#ifndef PROTOTTL_BOX_H_
#define PROTOTTL_BOX_H_

#include <array>

namespace protottl {

// Axis-aligned box in normalised scene coordinates, x1 < x2 and y1 < y2,
// all coordinates in [0, 1].
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  friend bool operator==(const Box&, const Box&) = default;
};

// (dx, dy, dlog w, dlog h) regression target of `target` relative to
// `reference`.
using BoxDeltas = std::array<double, 4>;

// Throws DataError unless `box` satisfies the Box invariants.
void ValidateBox(const Box& box);

bool IsValidBox(const Box& box);

// Intersection-over-union of two valid boxes, in [0, 1].
double Iou(const Box& a, const Box& b);

BoxDeltas EncodeBox(const Box& target, const Box& reference);

// Inverse of EncodeBox. The result is not clipped.
Box DecodeBox(const BoxDeltas& deltas, const Box& reference);

// Clips to [0, 1]^2 and keeps at least `min_size` extent on each axis so the
// result is always a valid Box.
Box ClipBox(const Box& box, double min_size = 1e-6);

}  // namespace protottl

#endif  // PROTOTTL_BOX_H_
