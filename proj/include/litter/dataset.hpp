#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "litter/detection.hpp"
#include "litter/geometry.hpp"

namespace litter {

class Taxonomy;

/// Vehicle pose at capture time. Heading is degrees clockwise from north.
struct GeoPose {
  double lat = 0.0;
  double lon = 0.0;
  double heading_deg = 0.0;

  friend bool operator==(const GeoPose&, const GeoPose&) = default;
};

/// One annotated or detected box. `score` is present only in detection files.
struct BoxRecord {
  int class_id = 0;
  BoundingBox box;
  std::optional<double> score;

  Detection as_detection() const { return {box, class_id, score.value_or(1.0)}; }
  friend bool operator==(const BoxRecord&, const BoxRecord&) = default;
};

struct FrameRecord {
  std::string image_path;
  int width = 0;
  int height = 0;
  std::optional<double> capture_time;
  std::optional<GeoPose> pose;
  std::vector<BoxRecord> boxes;

  std::vector<BoundingBox> boxes_only() const;
  std::vector<Detection> detections() const;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct SequenceManifest {
  std::vector<FrameRecord> frames;
  double capture_rate = 2.0;

  friend bool operator==(const SequenceManifest&, const SequenceManifest&) = default;
};

inline constexpr const char* kAnnotationFormat = "litter-annotations";
inline constexpr int kAnnotationVersion = 1;

struct LoadOptions {
  /// Class ids are checked against this taxonomy when set.
  const Taxonomy* taxonomy = nullptr;
  /// Unknown class ids are an error when true, a warning otherwise.
  bool strict = true;
};

struct LoadResult {
  SequenceManifest manifest;
  std::vector<std::string> warnings;
};

/// Parses the JSON Lines annotation/detection format. Throws FormatError
/// naming the line, frame and box of the first problem found.
LoadResult load_annotations(std::istream& in, const LoadOptions& options = {});
LoadResult load_annotations_file(const std::filesystem::path& path, const LoadOptions& options = {});

void save_annotations(const SequenceManifest& manifest, std::ostream& out);
/// Writes through a temporary sibling file and renames into place.
void save_annotations_file(const SequenceManifest& manifest, const std::filesystem::path& path);

/// Serializes one frame as the JSON object used on each data line.
std::string frame_to_json(const FrameRecord& frame);
/// Parses a data line object. Box bounds are validated; `frame_index` and
/// `line` only label errors.
FrameRecord frame_from_json(const std::string& text, std::size_t frame_index = 0, std::size_t line = 0);

/// Checks one box against frame bounds and the optional taxonomy. Returns an
/// error message, or an empty string when valid.
std::string validate_box(const BoxRecord& box, int width, int height, const Taxonomy* taxonomy);

/// Keeps every k-th frame from the first, k = round(capture_rate / target_rate).
/// Throws Error when target_rate <= 0 or target_rate > capture_rate.
SequenceManifest decimate(const SequenceManifest& sequence, double target_rate);

/// Number of frames kept when decimating `frame_count` frames by factor k.
inline std::size_t decimated_count(std::size_t frame_count, std::size_t k) { return (frame_count + k - 1) / k; }

struct DatasetStats {
  std::size_t frame_count = 0;
  std::size_t box_count = 0;
  std::map<std::string, std::size_t> per_class;
  std::map<std::string, std::size_t> per_category;
  std::size_t min_boxes_per_frame = 0;
  std::size_t max_boxes_per_frame = 0;
  double mean_boxes_per_frame = 0.0;
  double median_boxes_per_frame = 0.0;
};

DatasetStats dataset_stats(const SequenceManifest& manifest, const Taxonomy& taxonomy);
std::string stats_to_json(const DatasetStats& stats, int indent = 2);

}  // namespace litter
