#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "litter/tiling.hpp"

namespace litter {

/// Crops of one frame written to disk for detectors that read pixels.
/// Files are removed when the object is destroyed.
class TileImages {
 public:
  /// Loads `image`, checks it against the plan's frame size and writes one PNG
  /// per tile into `dir`. Throws Error when the image is unreadable or mismatched.
  TileImages(const std::filesystem::path& image, const TilePlan& plan, const std::filesystem::path& dir,
             const std::string& prefix);
  ~TileImages();
  TileImages(const TileImages&) = delete;
  TileImages& operator=(const TileImages&) = delete;

  const std::string& path(int tile_id) const { return paths_.at(static_cast<std::size_t>(tile_id)); }
  const std::vector<std::string>& paths() const noexcept { return paths_; }

 private:
  std::vector<std::string> paths_;
};

}  // namespace litter
