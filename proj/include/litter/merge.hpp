#pragma once

#include <span>
#include <string>
#include <vector>

#include "litter/detection.hpp"

namespace litter {

enum class OverlapMeasure { iou, over_smaller };

struct MergeConfig {
  /// Pairs whose overlap strictly exceeds this are linked. In (0, 1].
  double overlap_threshold = 0.6;
  OverlapMeasure overlap_measure = OverlapMeasure::iou;
};

double overlap(const BoundingBox& a, const BoundingBox& b, OverlapMeasure measure) noexcept;

/// Fuses same-class detections. Detections linked by an above-threshold
/// overlap form connected components; each component becomes its union box
/// with the maximum score. Components are recomputed on the fused boxes until
/// no pair is linked, so the result is a fixpoint of this function.
///
/// The output is sorted by detection_less and does not depend on input order.
std::vector<Detection> merge_detections(std::span<const Detection> detections, const MergeConfig& config);

/// Throws Error when the threshold is outside (0, 1].
void validate(const MergeConfig& config);

OverlapMeasure parse_overlap_measure(const std::string& name);
const char* to_string(OverlapMeasure measure);

}  // namespace litter
