#pragma once

#include <tuple>

#include "litter/geometry.hpp"

namespace litter {

/// A scored, classified box. Coordinates are tile- or frame-relative
/// depending on where the detection is in the pipeline.
struct Detection {
  BoundingBox box;
  int class_id = 0;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Canonical order: (class_id, box y, x, w, h, score).
inline bool detection_less(const Detection& a, const Detection& b) noexcept {
  return std::tie(a.class_id, a.box.y, a.box.x, a.box.w, a.box.h, a.score) <
         std::tie(b.class_id, b.box.y, b.box.x, b.box.w, b.box.h, b.score);
}

}  // namespace litter
