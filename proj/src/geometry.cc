// Copyright 2026 The kvpf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kvpf/geometry.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kvpf {
namespace {

// Grows a degenerate [lo, hi] interval to one unit, staying on the grid.
void clamp_extent(int& lo, int& hi) {
  if (lo > hi) std::swap(lo, hi);
  lo = std::clamp(lo, 0, kPageScale);
  hi = std::clamp(hi, 0, kPageScale);
  if (hi - lo >= 1) return;
  if (lo < kPageScale) {
    hi = lo + 1;
  } else {
    lo = kPageScale - 1;
    hi = kPageScale;
  }
}

void append_delta(const BBox& a, const BBox& b, double* out) {
  const double wa = a.width(), ha = a.height();
  const double wb = b.width(), hb = b.height();
  const double dx = a.center_x() - b.center_x();
  const double dy = a.center_y() - b.center_y();
  out[0] = dx / wa;
  out[1] = dy / ha;
  // Difference of logs keeps the swap antisymmetry exact in floating point.
  out[2] = std::log(wa) - std::log(wb);
  out[3] = std::log(ha) - std::log(hb);
  out[4] = -dx / wb;
  out[5] = -dy / hb;
}

}  // namespace

BBox BBox::make(int x1, int y1, int x2, int y2) {
  clamp_extent(x1, x2);
  clamp_extent(y1, y2);
  return BBox{x1, y1, x2, y2};
}

BBox normalize_box(double x1, double y1, double x2, double y2,
                   double page_width, double page_height) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2)) {
    std::ostringstream msg;
    msg << "normalize_box: non-finite coordinate in [" << x1 << ", " << y1
        << ", " << x2 << ", " << y2 << "]";
    throw std::invalid_argument(msg.str());
  }
  if (!(page_width > 0) || !(page_height > 0) || !std::isfinite(page_width) ||
      !std::isfinite(page_height)) {
    std::ostringstream msg;
    msg << "normalize_box: invalid page size " << page_width << "x"
        << page_height;
    throw std::invalid_argument(msg.str());
  }
  auto scale = [](double v, double extent) {
    v = std::clamp(v, 0.0, extent);
    return static_cast<int>(std::lround(v * kPageScale / extent));
  };
  return BBox::make(scale(x1, page_width), scale(y1, page_height),
                    scale(x2, page_width), scale(y2, page_height));
}

BBox union_box(const BBox& a, const BBox& b) {
  return BBox{std::min(a.x1, b.x1), std::min(a.y1, b.y1),
              std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

BoxDelta box_delta(const BBox& a, const BBox& b) {
  BoxDelta d;
  append_delta(a, b, d.data());
  return d;
}

SpatialFeature spatial_compatibility(const BBox& a, const BBox& b) {
  const BBox u = union_box(a, b);
  SpatialFeature r;
  append_delta(a, b, r.data());
  append_delta(a, u, r.data() + 6);
  append_delta(b, u, r.data() + 12);
  return r;
}

}  // namespace kvpf
