#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "litter/dataset.hpp"
#include "litter/detection.hpp"
#include "litter/geometry.hpp"
#include "litter/tiling.hpp"

namespace litter {

/// Output grid of the tile detector. The grid partitions the window exactly:
/// cols * cell_size == window width and rows * cell_size == window height.
struct GridSpec {
  int cols = 20;
  int rows = 15;
  int cell_size = 32;
  /// Context each cell's features see; not used for assignment.
  int receptive_field = 139;

  int window_width() const noexcept { return cols * cell_size; }
  int window_height() const noexcept { return rows * cell_size; }
  BoundingBox cell_region(int row, int col) const noexcept {
    return {col * cell_size, row * cell_size, cell_size, cell_size};
  }
};

/// Training-target assignment: for every cell (row-major, index r * cols + c)
/// the indices of boxes sharing at least one pixel with the cell's region.
/// Throws Error when a box is invalid or leaves the window.
std::vector<std::vector<std::size_t>> assign_cells(std::span<const BoundingBox> boxes, const GridSpec& grid);

/// Everything a detector may look at for one tile.
struct TileInput {
  std::size_t frame_index = 0;
  /// The full frame record; oracle detectors read its ground-truth boxes.
  const FrameRecord* frame = nullptr;
  const TilePlan* plan = nullptr;
  int tile_id = 0;
  /// Cropped tile image on disk. Empty unless the detector needs pixels.
  std::string image_path;
};

/// Tile detector contract. Implementations must be safe to call concurrently
/// on distinct tiles and return detections in tile coordinates.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect_tile(const TileInput& input) = 0;
  /// True when detect_tile reads TileInput::image_path.
  virtual bool needs_pixels() const noexcept { return false; }
  /// Called once after the last tile; reports deferred failures such as a
  /// helper process exiting with a nonzero status.
  virtual void finish() {}
};

/// Ground truth intersecting the tile, clipped to it, score 1.
std::vector<Detection> replay_detect(std::span<const BoxRecord> annotations, const TilePlan& plan, int tile_id);

class ReplayDetector final : public Detector {
 public:
  std::vector<Detection> detect_tile(const TileInput& input) override;
};

struct ScoreDistribution {
  enum class Kind { uniform, beta, constant };
  Kind kind = Kind::uniform;
  /// uniform: [a, b]; beta: shape (a, b); constant: a.
  double a = 0.0;
  double b = 1.0;
};

struct JitterParams {
  double drop_rate = 0.0;
  /// Standard deviation of the per-axis integer position shift, pixels.
  double shift_sigma = 0.0;
  ScoreDistribution score;
  std::uint64_t seed = 0;
};

/// Perturbation applied to one ground-truth object. Decided per object so that
/// every tile seeing the object agrees on it.
struct JitterDecision {
  bool dropped = false;
  int dx = 0;
  int dy = 0;
  double score = 1.0;
};

JitterDecision jitter_decision(const JitterParams& params, std::size_t frame_index, std::size_t box_index);

/// Replay output degraded by drops, position shifts and sampled scores.
/// Deterministic in (params.seed, frame_index, box order).
std::vector<Detection> jitter_detect(std::span<const BoxRecord> annotations, const TilePlan& plan, int tile_id,
                                     const JitterParams& params, std::size_t frame_index);

class JitterDetector final : public Detector {
 public:
  explicit JitterDetector(JitterParams params);
  std::vector<Detection> detect_tile(const TileInput& input) override;

 private:
  JitterParams params_;
};

struct ExternalDetectorConfig {
  /// Run through /bin/sh -c.
  std::string command;
  double timeout_s = 30.0;
  int workers = 1;
};

struct DetectorConfig {
  enum class Kind { replay, jitter, external };
  Kind kind = Kind::replay;
  JitterParams jitter;
  ExternalDetectorConfig external;
};

/// Throws Error on invalid parameters.
void validate(const DetectorConfig& config);
std::unique_ptr<Detector> make_detector(const DetectorConfig& config);

DetectorConfig::Kind parse_detector_kind(const std::string& name);
const char* to_string(DetectorConfig::Kind kind);

}  // namespace litter
