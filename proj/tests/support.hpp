#pragma once

// Independent oracles and synthetic data shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except
// where a helper is explicitly about driving it (e.g. run_replay).

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "litter/dataset.hpp"
#include "litter/detection.hpp"
#include "litter/geometry.hpp"
#include "litter/tiling.hpp"

namespace testing_support {

using litter::BoundingBox;
using litter::Detection;

// ---- rasterization -------------------------------------------------------

/// Pixel count of a ∩ b by visiting every pixel of `a`.
std::int64_t raster_intersection(const BoundingBox& a, const BoundingBox& b);

/// Binary mask of the union of boxes on a width x height canvas.
std::vector<std::uint8_t> raster_mask(const std::vector<BoundingBox>& boxes, int width, int height);

/// Number of pixels of the frame not covered by any tile of the plan.
std::int64_t uncovered_pixels(const litter::TilePlan& plan);

// ---- matching ------------------------------------------------------------

struct OracleMatch {
  std::int64_t correct = 0;
  std::int64_t false_positives = 0;
};

/// Greedy matching by repeated linear selection with exact rational IoU
/// comparisons on pixel counts. Shares no code with the library matcher.
OracleMatch oracle_match(const std::vector<Detection>& dets, const std::vector<BoundingBox>& gts,
                         std::int64_t iou_num, std::int64_t iou_den);

// ---- merging -------------------------------------------------------------

/// Connected components on the explicit pairwise overlap matrix, repeated
/// until no pair links. `over_smaller` selects the overlap measure.
std::vector<Detection> oracle_merge(std::vector<Detection> dets, double threshold, bool over_smaller);

// ---- cell assignment -----------------------------------------------------

/// For each of rows*cols cells, the indices of boxes with a common pixel,
/// found by scanning every pixel of each box.
std::vector<std::vector<std::size_t>> oracle_cells(const std::vector<BoundingBox>& boxes, int cols, int rows,
                                                   int cell);

// ---- synthetic manifests -------------------------------------------------

struct SyntheticOptions {
  std::size_t frames = 60;
  int boxes_per_frame = 12;
  int min_side = 8;
  /// Must stay below the tile overlap so a fragment pair always overlaps fully.
  int max_side = 120;
  /// Fraction of boxes placed across a tile boundary.
  double straddle_fraction = 0.4;
  std::vector<int> class_ids = {1, 2, 3, 4, 5, 6, 7, 12, 25};
  litter::FrameSpec frame;
  litter::WindowSpec window;
  std::uint64_t seed = 1;
  bool with_pose = false;
};

/// Frames with non-overlapping boxes (any class), a share of them straddling
/// internal tile edges.
litter::SequenceManifest synthetic_manifest(const SyntheticOptions& options);

/// True when the box is clipped by at least one tile it intersects.
bool straddles(const BoundingBox& box, const litter::TilePlan& plan);

// ---- GeoJSON -------------------------------------------------------------

/// Strict structural check of an RFC 7946 FeatureCollection of Polygons.
/// Returns an empty string when valid, otherwise the first problem found.
std::string validate_geojson(const std::string& text);

// ---- misc ----------------------------------------------------------------

/// Fresh empty directory under the temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random valid box inside a width x height canvas.
BoundingBox random_box(std::mt19937_64& rng, int width, int height, int max_side = 0);

}  // namespace testing_support
