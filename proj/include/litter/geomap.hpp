#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "litter/dataset.hpp"
#include "litter/tiling.hpp"

namespace litter {

/// Metres per degree of latitude in the local tangent approximation.
inline constexpr double kMetersPerDegree = 111320.0;
/// Poses closer to a pole than this are rejected.
inline constexpr double kMaxAbsLatitude = 85.0;

/// Along-track ground length of one frame: distance travelled between frames
/// stretched so consecutive frames share `frame_overlap` of their length.
double swath_length_from_motion(double speed_kmh, double frames_per_second, double frame_overlap);

/// Ground rectangle seen by a nadir camera on flat ground.
struct CameraFootprint {
  double height_m = 3.0;
  double swath_width_m = 5.0;
  double swath_length_m = swath_length_from_motion(12.0, 2.0, 0.15);
  FrameSpec frame;
};

/// Offsets from the frame centre on the ground. `along` is positive ahead
/// of the vehicle (image top), `across` positive to its right (image right).
struct GroundOffset {
  double across_m = 0.0;
  double along_m = 0.0;
};

/// Linear map from pixel position to ground offsets. Throws GeoError outside the frame.
GroundOffset pixel_to_ground(double px, double py, const CameraFootprint& footprint);

/// Rotates offsets by the heading and adds them to the pose position.
/// The heading is carried over unchanged. Throws GeoError near the poles.
GeoPose ground_to_geo(const GroundOffset& offset, const GeoPose& pose);
/// Inverse of ground_to_geo for the same pose.
GroundOffset geo_to_ground(const GeoPose& point, const GeoPose& pose);

struct GeoDetection {
  double lat = 0.0;
  double lon = 0.0;
  std::string category;
};

struct DensityGridConfig {
  /// Anchor of the local east/north frame.
  double origin_lat = 0.0;
  double origin_lon = 0.0;
  double cell_size_m = 10.0;
};

/// Sparse per-category counts over a ground grid. Cell (ix, iy) covers
/// [ix * s, (ix + 1) * s) east by [iy * s, (iy + 1) * s) north of the origin.
class DensityGrid {
 public:
  using CellKey = std::pair<std::int64_t, std::int64_t>;
  using Counts = std::map<std::string, std::uint64_t>;

  explicit DensityGrid(DensityGridConfig config = {});

  const DensityGridConfig& config() const noexcept { return config_; }
  const std::map<CellKey, Counts>& cells() const noexcept { return cells_; }

  CellKey cell_of(double east_m, double north_m) const noexcept;
  void add_local(double east_m, double north_m, const std::string& category, std::uint64_t count = 1);
  void add(const GeoDetection& detection);
  /// Adds every count of `other`; configs must match.
  void merge(const DensityGrid& other);

  /// Local east/north metres of a geographic point relative to the origin.
  std::pair<double, double> to_local(double lat, double lon) const;
  /// Geographic (lat, lon) of a local point.
  std::pair<double, double> to_geo(double east_m, double north_m) const;

  std::map<std::string, std::uint64_t> totals() const;

 private:
  DensityGridConfig config_;
  std::map<CellKey, Counts> cells_;
};

DensityGrid accumulate_density(std::span<const GeoDetection> detections, const DensityGridConfig& config);

/// RFC 7946 FeatureCollection with one counter-clockwise polygon per occupied cell.
std::string export_geojson(const DensityGrid& grid, int indent = -1);

struct GeoreferenceResult {
  std::vector<GeoDetection> detections;
  std::size_t frames_without_pose = 0;
};

/// Projects every box centre of every posed frame to the ground and labels it
/// with its report category. Frames without a pose are counted and skipped.
/// The footprint's frame is replaced by each record's dimensions.
GeoreferenceResult georeference(const SequenceManifest& manifest, const Taxonomy& taxonomy,
                                const CameraFootprint& footprint);

}  // namespace litter
