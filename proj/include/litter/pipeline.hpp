#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "litter/dataset.hpp"
#include "litter/detect.hpp"
#include "litter/eval.hpp"
#include "litter/geomap.hpp"
#include "litter/merge.hpp"
#include "litter/taxonomy.hpp"
#include "litter/tiling.hpp"

namespace litter {

struct PipelineConfig {
  WindowSpec window;
  MergeConfig merge;
  DetectorConfig detector;
  EvalConfig eval;
  /// Empty selects the built-in taxonomy.
  std::string taxonomy_path;
  int workers = 1;
  /// Frames handed to the worker pool at a time.
  int chunk_frames = 16;
  /// Where tile crops are written for pixel-reading detectors. Empty uses a
  /// fresh directory under the system temp dir.
  std::filesystem::path scratch_dir;
  CameraFootprint footprint;
  double cell_size_m = 10.0;
};

/// Reads the JSON config format documented in the README. Unknown keys are errors.
PipelineConfig pipeline_config_from_json(const nlohmann::json& doc);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Throws Error when any sub-config is invalid.
void validate(const PipelineConfig& config);

Taxonomy load_configured_taxonomy(const PipelineConfig& config);

struct PipelineTiming {
  double total_seconds = 0.0;
  /// Wall time spent inside Detector::detect_tile, summed over workers.
  double detector_seconds = 0.0;
  std::size_t frames = 0;
  std::size_t tiles = 0;

  double frames_per_second() const noexcept { return total_seconds > 0.0 ? frames / total_seconds : 0.0; }
};

struct PipelineResult {
  SequenceManifest detections;
  std::optional<EvalReport> report;
  PipelineTiming timing;
};

/// Tile, detect, map back to the frame and merge for one frame.
/// `image_root` resolves relative image paths for pixel-reading detectors.
FrameRecord detect_frame(const FrameRecord& frame, std::size_t frame_index, Detector& detector,
                         const Taxonomy& taxonomy, const PipelineConfig& config,
                         const std::filesystem::path& image_root = {});

/// Runs the pipeline over a manifest. Frames are written to `sink` in order
/// as soon as their chunk completes. Errors name the failing frame and tile.
PipelineResult run_pipeline(const SequenceManifest& manifest, const Taxonomy& taxonomy,
                            const PipelineConfig& config, Detector& detector,
                            const std::filesystem::path& image_root = {},
                            const std::function<void(const FrameRecord&)>& sink = {});

struct PipelineFiles {
  std::filesystem::path manifest;
  std::filesystem::path detections;
  std::filesystem::path report;
  std::filesystem::path csv;
};

/// File-level driver. The detections file is written as
/// `<detections>.incomplete` and renamed once every frame succeeded; on
/// failure the marked partial file is left behind.
PipelineResult run_pipeline_files(const PipelineFiles& files, const PipelineConfig& config);

}  // namespace litter
