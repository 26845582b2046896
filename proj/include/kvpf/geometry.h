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

#ifndef KVPF_GEOMETRY_H_
#define KVPF_GEOMETRY_H_

#include <array>
#include <cstddef>

namespace kvpf {

// Page coordinate scale. Boxes live on an integer grid [0, kPageScale].
inline constexpr int kPageScale = 1000;

// Axis-aligned box in page-normalized integer coordinates. Construction
// through make() reorders inverted corners and clamps width and height to at
// least one unit so that deltas never divide by zero.
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 1;
  int y2 = 1;

  static BBox make(int x1, int y1, int x2, int y2);

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  bool contains(const BBox& other) const {
    return x1 <= other.x1 && y1 <= other.y1 && x2 >= other.x2 &&
           y2 >= other.y2;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// (t_x(i,j), t_y(i,j), t_w(i,j), t_h(i,j), t_x(j,i), t_y(j,i)).
using BoxDelta = std::array<double, 6>;

// Delta(a,b) ++ Delta(a,U) ++ Delta(b,U) with U the union box.
inline constexpr std::size_t kSpatialFeatureDim = 18;
using SpatialFeature = std::array<double, kSpatialFeatureDim>;

// Scales a pixel-space box onto the [0,1000] grid. Coordinates are clipped to
// the page, rounded, reordered and clamped to a minimum extent of one unit.
// Throws std::invalid_argument on non-finite input or a non-positive page.
BBox normalize_box(double x1, double y1, double x2, double y2,
                   double page_width, double page_height);

BBox union_box(const BBox& a, const BBox& b);

BoxDelta box_delta(const BBox& a, const BBox& b);

SpatialFeature spatial_compatibility(const BBox& a, const BBox& b);

}  // namespace kvpf

#endif  // KVPF_GEOMETRY_H_
