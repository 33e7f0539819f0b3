// Axis-aligned box geometry.
#pragma once

#include "palmscope/image.hpp"

#include <algorithm>

namespace palmscope {

struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool operator==(const Box&) const = default;
};

/// Intersection-over-union with real-valued rectangle measures.
/// Disjoint boxes yield 0; the result always lies in [0,1].
inline double iou(const Box& a, const Box& b) {
  const double iw =
      std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double ih =
      std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

}  // namespace palmscope
