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

#include "protottl/box.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "protottl/error.h"

namespace protottl {

bool IsValidBox(const Box& box) {
  const bool finite = std::isfinite(box.x1) && std::isfinite(box.y1) &&
                      std::isfinite(box.x2) && std::isfinite(box.y2);
  return finite && box.x1 < box.x2 && box.y1 < box.y2 && box.x1 >= 0.0 &&
         box.y1 >= 0.0 && box.x2 <= 1.0 && box.y2 <= 1.0;
}

void ValidateBox(const Box& box) {
  if (!IsValidBox(box)) {
    std::ostringstream os;
    os << "invalid box (" << box.x1 << ", " << box.y1 << ", " << box.x2
       << ", " << box.y2 << ")";
    throw DataError(os.str());
  }
}

double Iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoxDeltas EncodeBox(const Box& target, const Box& reference) {
  const double w = reference.width();
  const double h = reference.height();
  return {(target.center_x() - reference.center_x()) / w,
          (target.center_y() - reference.center_y()) / h,
          std::log(target.width() / w), std::log(target.height() / h)};
}

Box DecodeBox(const BoxDeltas& deltas, const Box& reference) {
  const double w = reference.width();
  const double h = reference.height();
  const double cx = reference.center_x() + deltas[0] * w;
  const double cy = reference.center_y() + deltas[1] * h;
  const double nw = w * std::exp(deltas[2]);
  const double nh = h * std::exp(deltas[3]);
  return {cx - 0.5 * nw, cy - 0.5 * nh, cx + 0.5 * nw, cy + 0.5 * nh};
}

Box ClipBox(const Box& box, double min_size) {
  auto clip_axis = [min_size](double lo, double hi, double* out_lo,
                              double* out_hi) {
    lo = std::clamp(std::isfinite(lo) ? lo : 0.0, 0.0, 1.0);
    hi = std::clamp(std::isfinite(hi) ? hi : 1.0, 0.0, 1.0);
    if (hi - lo < min_size) {
      const double mid = std::clamp(0.5 * (lo + hi), 0.5 * min_size,
                                    1.0 - 0.5 * min_size);
      lo = mid - 0.5 * min_size;
      hi = mid + 0.5 * min_size;
    }
    *out_lo = lo;
    *out_hi = hi;
  };
  Box out;
  clip_axis(box.x1, box.x2, &out.x1, &out.x2);
  clip_axis(box.y1, box.y2, &out.y1, &out.y2);
  return out;
}

}  // namespace protottl
