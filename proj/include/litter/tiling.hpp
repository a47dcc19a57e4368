#pragma once

#include <string>
#include <vector>

#include "litter/detection.hpp"
#include "litter/geometry.hpp"

namespace litter {

struct FrameSpec {
  int width = 1920;
  int height = 1480;

  friend bool operator==(const FrameSpec&, const FrameSpec&) = default;
};

struct WindowSpec {
  int width = 640;
  int height = 480;
  /// Minimum fraction of the window shared by neighbouring tiles, in [0, 1).
  double min_overlap = 0.15;

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

struct Tile {
  int tile_id = 0;
  int origin_x = 0;
  int origin_y = 0;

  friend bool operator==(const Tile&, const Tile&) = default;
};

struct TilePlan {
  FrameSpec frame;
  WindowSpec window;
  /// Row-major by (origin_y, origin_x); tile_id equals the position.
  std::vector<Tile> tiles;
  std::vector<int> column_origins;
  std::vector<int> row_origins;

  BoundingBox extent(const Tile& tile) const noexcept {
    return {tile.origin_x, tile.origin_y, window.width, window.height};
  }
  const Tile& tile(int tile_id) const;
};

/// Evenly spaced origins along one axis of length `length` for a window of
/// `window` pixels. The first origin is 0 and the last is length - window.
std::vector<int> axis_origins(int length, int window, double min_overlap);

/// Throws TilingError when the window exceeds the frame or a spec is invalid.
TilePlan plan_tiles(const FrameSpec& frame, const WindowSpec& window);

/// Translates a tile-relative detection into frame coordinates.
/// Throws TilingError when the box leaves the window extent.
Detection tile_to_frame(const Detection& detection, const Tile& tile, const WindowSpec& window);

/// Ids of tiles whose extent shares at least one pixel with `box`, ascending.
std::vector<int> tiles_intersecting(const BoundingBox& box, const TilePlan& plan);

std::string tile_plan_to_json(const TilePlan& plan, int indent = 2);

}  // namespace litter
