#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "litter/detection.hpp"
#include "litter/geometry.hpp"
#include "litter/tiling.hpp"

namespace litter {

class Taxonomy;
struct SequenceManifest;

struct MatchResult {
  std::int64_t correct = 0;          // CD
  std::int64_t false_positives = 0;  // FP
  std::int64_t ground_truth = 0;     // N
  /// (detection index, ground-truth index) into the caller's sequences.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// Greedy matching. Detections are visited by descending score, ties broken
/// by box (y, x, w, h) then input position; each claims the still-unmatched
/// ground truth with the highest IoU >= iou_threshold (ties: lowest index).
MatchResult match_detections(std::span<const Detection> detections, std::span<const BoundingBox> ground_truth,
                             double iou_threshold = 0.5);

/// Precision and recall; nullopt marks an undefined quotient.
struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
};

/// Integer tallies behind a precision/recall pair. For the pixel method the
/// counts are pixels: correct = |D and G|, false_positives = |D| - correct,
/// ground_truth = |G|.
struct Counts {
  std::int64_t correct = 0;
  std::int64_t false_positives = 0;
  std::int64_t ground_truth = 0;

  Counts& operator+=(const Counts& o) noexcept {
    correct += o.correct;
    false_positives += o.false_positives;
    ground_truth += o.ground_truth;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

PrecisionRecall precision_recall(const Counts& counts) noexcept;
PrecisionRecall precision_recall(const MatchResult& match) noexcept;

struct PRPoint {
  double threshold = 0.0;
  PrecisionRecall pr;
  Counts counts;
};

/// Detections and ground truth of one frame for one evaluation group.
struct FrameSample {
  std::vector<Detection> detections;
  std::vector<BoundingBox> ground_truth;
  FrameSpec frame;
};

enum class EvalMethod { box, pixel };

/// Pixel-mask tallies for one frame: boxes are rasterized into binary masks,
/// overlapping boxes count each pixel once. Throws Error when a box leaves the frame.
Counts pixel_mask_counts(std::span<const Detection> detections, std::span<const BoundingBox> ground_truth,
                         const FrameSpec& frame);
PrecisionRecall pixel_mask_pr(std::span<const Detection> detections, std::span<const BoundingBox> ground_truth,
                              const FrameSpec& frame);

/// Counts summed over frames at one score threshold (detections with score >= threshold).
Counts evaluate_counts(std::span<const FrameSample> frames, EvalMethod method, double threshold,
                       double iou_threshold = 0.5);

/// One point per threshold; thresholds must be strictly increasing.
std::vector<PRPoint> pr_curve(std::span<const FrameSample> frames, EvalMethod method, double iou_threshold,
                              std::span<const double> thresholds);

struct EvalConfig {
  double iou_threshold = 0.5;
  std::vector<double> thresholds = default_thresholds();
  /// Method per group name; groups not listed use default_method.
  std::map<std::string, EvalMethod> methods = {{"Leaves", EvalMethod::pixel}};
  EvalMethod default_method = EvalMethod::box;
  /// Group by report category (true) or by class name (false).
  bool by_category = true;

  EvalMethod method_for(const std::string& group) const;
  static std::vector<double> default_thresholds();
};

struct CategoryReport {
  std::string name;
  EvalMethod method = EvalMethod::box;
  std::vector<PRPoint> points;
  /// Tallies at the lowest threshold.
  Counts counts;
};

struct EvalReport {
  std::vector<CategoryReport> categories;
};

/// Evaluates a detection manifest against a ground-truth manifest frame by
/// frame. Both must list the same frames in the same order. Groups follow the
/// taxonomy's order; groups with neither detections nor ground truth are skipped.
EvalReport evaluate(const SequenceManifest& ground_truth, const SequenceManifest& detections,
                    const Taxonomy& taxonomy, const EvalConfig& config);

/// Same evaluation with the method forced for every group.
CategoryReport evaluate_group(std::span<const FrameSample> frames, const std::string& name, EvalMethod method,
                              const EvalConfig& config);

/// Splits a frame pair into per-group samples keyed by group name.
std::map<std::string, std::vector<FrameSample>> group_samples(const SequenceManifest& ground_truth,
                                                              const SequenceManifest& detections,
                                                              const Taxonomy& taxonomy, bool by_category);

std::string report_to_json(const EvalReport& report, int indent = 2);
/// Header "category,threshold,precision,recall"; undefined values are written as "undefined".
std::string report_to_csv(const EvalReport& report);

EvalMethod parse_eval_method(const std::string& name);
const char* to_string(EvalMethod method);

}  // namespace litter
