#pragma once

#include <cstdint>
#include <optional>
#include <tuple>

namespace litter {

/// Axis-aligned pixel rectangle, top-left origin, half-open extent
/// [x, x + w) x [y, y + h).
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  std::int64_t area() const noexcept { return static_cast<std::int64_t>(w) * h; }
  bool valid() const noexcept { return w >= 1 && h >= 1; }

  bool contains(const BoundingBox& other) const noexcept {
    return other.x >= x && other.y >= y && other.right() <= right() && other.bottom() <= bottom();
  }
  bool contains_point(int px, int py) const noexcept {
    return px >= x && px < right() && py >= y && py < bottom();
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Ordering used wherever boxes need a canonical sequence: (y, x, w, h).
inline bool box_less(const BoundingBox& a, const BoundingBox& b) noexcept {
  return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
}

std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept;

/// The overlapping rectangle, or nullopt when the boxes share no pixel.
std::optional<BoundingBox> intersection(const BoundingBox& a, const BoundingBox& b) noexcept;

double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

/// Intersection divided by the area of the smaller box.
double overlap_over_smaller(const BoundingBox& a, const BoundingBox& b) noexcept;

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) noexcept;

}  // namespace litter
