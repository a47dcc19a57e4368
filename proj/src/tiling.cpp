#include "litter/tiling.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "litter/error.hpp"

namespace litter {

const Tile& TilePlan::tile(int tile_id) const {
  if (tile_id < 0 || static_cast<std::size_t>(tile_id) >= tiles.size()) {
    throw TilingError("unknown tile_id " + std::to_string(tile_id));
  }
  return tiles[static_cast<std::size_t>(tile_id)];
}

std::vector<int> axis_origins(int length, int window, double min_overlap) {
  if (window < 1) throw TilingError("window extent must be at least 1 pixel");
  if (!(min_overlap >= 0.0 && min_overlap < 1.0)) throw TilingError("min_overlap must lie in [0, 1)");
  if (length < window) {
    throw TilingError("window (" + std::to_string(window) + ") larger than frame (" + std::to_string(length) + ")");
  }
  if (length == window) return {0};

  const std::int64_t span = length - window;
  const double stride = window * (1.0 - min_overlap);
  // Guard against 2.0000000001-style ratios adding a spurious tile.
  const auto gaps = static_cast<std::int64_t>(std::ceil(static_cast<double>(span) / stride - 1e-9));
  // More than span + 1 origins would repeat positions; a one-pixel stride is
  // the densest distinct placement.
  const std::int64_t count = std::min(span + 1, std::max<std::int64_t>(2, gaps + 1));

  std::vector<int> origins(static_cast<std::size_t>(count));
  const std::int64_t denom = count - 1;
  for (std::int64_t i = 0; i < count; ++i) {
    // round(i * span / denom), half away from zero, in integers
    origins[static_cast<std::size_t>(i)] = static_cast<int>((2 * i * span + denom) / (2 * denom));
  }
  return origins;
}

TilePlan plan_tiles(const FrameSpec& frame, const WindowSpec& window) {
  if (frame.width < 1 || frame.height < 1) throw TilingError("frame dimensions must be positive");
  TilePlan plan;
  plan.frame = frame;
  plan.window = window;
  plan.column_origins = axis_origins(frame.width, window.width, window.min_overlap);
  plan.row_origins = axis_origins(frame.height, window.height, window.min_overlap);
  plan.tiles.reserve(plan.column_origins.size() * plan.row_origins.size());
  int id = 0;
  for (int oy : plan.row_origins) {
    for (int ox : plan.column_origins) plan.tiles.push_back({id++, ox, oy});
  }
  return plan;
}

Detection tile_to_frame(const Detection& detection, const Tile& tile, const WindowSpec& window) {
  const BoundingBox extent{0, 0, window.width, window.height};
  if (!detection.box.valid() || !extent.contains(detection.box)) {
    const auto& b = detection.box;
    throw TilingError("box (" + std::to_string(b.x) + "," + std::to_string(b.y) + "," + std::to_string(b.w) + "," +
                      std::to_string(b.h) + ") exceeds the " + std::to_string(window.width) + "x" +
                      std::to_string(window.height) + " window of tile " + std::to_string(tile.tile_id));
  }
  Detection out = detection;
  out.box.x += tile.origin_x;
  out.box.y += tile.origin_y;
  return out;
}

std::vector<int> tiles_intersecting(const BoundingBox& box, const TilePlan& plan) {
  const auto cols = plan.column_origins.size();
  std::vector<int> ids;
  for (std::size_t r = 0; r < plan.row_origins.size(); ++r) {
    const int oy = plan.row_origins[r];
    if (oy >= box.bottom() || oy + plan.window.height <= box.y) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const int ox = plan.column_origins[c];
      if (ox >= box.right() || ox + plan.window.width <= box.x) continue;
      ids.push_back(static_cast<int>(r * cols + c));
    }
  }
  return ids;
}

std::string tile_plan_to_json(const TilePlan& plan, int indent) {
  nlohmann::ordered_json doc;
  doc["frame"] = {{"width", plan.frame.width}, {"height", plan.frame.height}};
  doc["window"] = {
      {"width", plan.window.width}, {"height", plan.window.height}, {"min_overlap", plan.window.min_overlap}};
  auto tiles = nlohmann::ordered_json::array();
  for (const auto& t : plan.tiles) {
    tiles.push_back({{"tile_id", t.tile_id}, {"origin_x", t.origin_x}, {"origin_y", t.origin_y}});
  }
  doc["tiles"] = std::move(tiles);
  return doc.dump(indent);
}

}  // namespace litter
