#include "litter/geomap.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "litter/error.hpp"
#include "litter/taxonomy.hpp"

namespace litter {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap_lon(double lon) {
  if (lon > 180.0 || lon < -180.0) lon = std::remainder(lon, 360.0);
  return lon;
}

double meters_per_degree_lon(double lat_deg) { return kMetersPerDegree * std::cos(lat_deg * kDegToRad); }

void check_latitude(double lat) {
  if (!(std::abs(lat) <= kMaxAbsLatitude)) {
    throw GeoError("latitude " + std::to_string(lat) + " too close to a pole for the local tangent approximation");
  }
}

}  // namespace

double swath_length_from_motion(double speed_kmh, double frames_per_second, double frame_overlap) {
  return speed_kmh * 1000.0 / 3600.0 / frames_per_second / (1.0 - frame_overlap);
}

GroundOffset pixel_to_ground(double px, double py, const CameraFootprint& fp) {
  const double w = fp.frame.width;
  const double h = fp.frame.height;
  if (!(px >= 0.0 && px <= w && py >= 0.0 && py <= h)) {
    throw GeoError("pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") outside the frame");
  }
  return {(px / w - 0.5) * fp.swath_width_m, (0.5 - py / h) * fp.swath_length_m};
}

GeoPose ground_to_geo(const GroundOffset& offset, const GeoPose& pose) {
  check_latitude(pose.lat);
  const double heading = pose.heading_deg * kDegToRad;
  const double east = offset.across_m * std::cos(heading) + offset.along_m * std::sin(heading);
  const double north = offset.along_m * std::cos(heading) - offset.across_m * std::sin(heading);
  return {pose.lat + north / kMetersPerDegree, wrap_lon(pose.lon + east / meters_per_degree_lon(pose.lat)),
          pose.heading_deg};
}

GroundOffset geo_to_ground(const GeoPose& point, const GeoPose& pose) {
  check_latitude(pose.lat);
  const double north = (point.lat - pose.lat) * kMetersPerDegree;
  const double east = wrap_lon(point.lon - pose.lon) * meters_per_degree_lon(pose.lat);
  const double heading = pose.heading_deg * kDegToRad;
  return {east * std::cos(heading) - north * std::sin(heading), east * std::sin(heading) + north * std::cos(heading)};
}

DensityGrid::DensityGrid(DensityGridConfig config) : config_(config) {
  if (!(config_.cell_size_m > 0.0)) throw GeoError("cell_size_m must be positive");
  check_latitude(config_.origin_lat);
}

DensityGrid::CellKey DensityGrid::cell_of(double east_m, double north_m) const noexcept {
  return {static_cast<std::int64_t>(std::floor(east_m / config_.cell_size_m)),
          static_cast<std::int64_t>(std::floor(north_m / config_.cell_size_m))};
}

void DensityGrid::add_local(double east_m, double north_m, const std::string& category, std::uint64_t count) {
  cells_[cell_of(east_m, north_m)][category] += count;
}

std::pair<double, double> DensityGrid::to_local(double lat, double lon) const {
  return {wrap_lon(lon - config_.origin_lon) * meters_per_degree_lon(config_.origin_lat),
          (lat - config_.origin_lat) * kMetersPerDegree};
}

std::pair<double, double> DensityGrid::to_geo(double east_m, double north_m) const {
  return {config_.origin_lat + north_m / kMetersPerDegree,
          wrap_lon(config_.origin_lon + east_m / meters_per_degree_lon(config_.origin_lat))};
}

void DensityGrid::add(const GeoDetection& detection) {
  const auto [east, north] = to_local(detection.lat, detection.lon);
  add_local(east, north, detection.category);
}

void DensityGrid::merge(const DensityGrid& other) {
  if (other.config_.cell_size_m != config_.cell_size_m || other.config_.origin_lat != config_.origin_lat ||
      other.config_.origin_lon != config_.origin_lon) {
    throw GeoError("cannot merge density grids with different configurations");
  }
  for (const auto& [key, counts] : other.cells_) {
    auto& mine = cells_[key];
    for (const auto& [category, n] : counts) mine[category] += n;
  }
}

std::map<std::string, std::uint64_t> DensityGrid::totals() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [key, counts] : cells_) {
    for (const auto& [category, n] : counts) out[category] += n;
  }
  return out;
}

DensityGrid accumulate_density(std::span<const GeoDetection> detections, const DensityGridConfig& config) {
  DensityGrid grid(config);
  for (const auto& d : detections) grid.add(d);
  return grid;
}

std::string export_geojson(const DensityGrid& grid, int indent) {
  using ordered_json = nlohmann::ordered_json;
  const double s = grid.config().cell_size_m;
  auto features = ordered_json::array();
  for (const auto& [key, counts] : grid.cells()) {
    const double x0 = static_cast<double>(key.first) * s;
    const double y0 = static_cast<double>(key.second) * s;
    auto corner = [&](double e, double n) {
      const auto [lat, lon] = grid.to_geo(e, n);
      return ordered_json::array({lon, lat});
    };
    // Exterior ring counter-clockwise: SW, SE, NE, NW, SW.
    auto ring = ordered_json::array(
        {corner(x0, y0), corner(x0 + s, y0), corner(x0 + s, y0 + s), corner(x0, y0 + s), corner(x0, y0)});

    ordered_json properties;
    std::uint64_t total = 0;
    for (const auto& [category, n] : counts) {
      properties[category] = n;
      total += n;
    }
    properties["total"] = total;
    properties["cell_size_m"] = s;
    properties["ix"] = key.first;
    properties["iy"] = key.second;

    ordered_json feature;
    feature["type"] = "Feature";
    feature["geometry"] = {{"type", "Polygon"}, {"coordinates", ordered_json::array({std::move(ring)})}};
    feature["properties"] = std::move(properties);
    features.push_back(std::move(feature));
  }
  ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump(indent);
}

GeoreferenceResult georeference(const SequenceManifest& manifest, const Taxonomy& taxonomy,
                                const CameraFootprint& footprint) {
  GeoreferenceResult result;
  for (const auto& frame : manifest.frames) {
    if (!frame.pose) {
      ++result.frames_without_pose;
      continue;
    }
    CameraFootprint fp = footprint;
    fp.frame = {frame.width, frame.height};
    for (const auto& b : frame.boxes) {
      const double cx = b.box.x + b.box.w / 2.0;
      const double cy = b.box.y + b.box.h / 2.0;
      const GeoPose at = ground_to_geo(pixel_to_ground(cx, cy, fp), *frame.pose);
      result.detections.push_back({at.lat, at.lon, taxonomy.rollup(b.class_id)});
    }
  }
  return result;
}

}  // namespace litter
