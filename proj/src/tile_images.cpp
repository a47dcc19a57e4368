#include "litter/tile_images.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "litter/error.hpp"

namespace litter {

TileImages::TileImages(const std::filesystem::path& image, const TilePlan& plan, const std::filesystem::path& dir,
                       const std::string& prefix) {
  const cv::Mat frame = cv::imread(image.string(), cv::IMREAD_UNCHANGED);
  if (frame.empty()) throw Error("cannot read image " + image.string());
  if (frame.cols != plan.frame.width || frame.rows != plan.frame.height) {
    throw Error("image " + image.string() + " is " + std::to_string(frame.cols) + "x" + std::to_string(frame.rows) +
                ", annotation says " + std::to_string(plan.frame.width) + "x" + std::to_string(plan.frame.height));
  }
  paths_.reserve(plan.tiles.size());
  for (const auto& tile : plan.tiles) {
    const cv::Rect roi(tile.origin_x, tile.origin_y, plan.window.width, plan.window.height);
    const auto out = dir / (prefix + "_tile" + std::to_string(tile.tile_id) + ".png");
    if (!cv::imwrite(out.string(), frame(roi))) throw Error("cannot write tile image " + out.string());
    paths_.push_back(out.string());
  }
}

TileImages::~TileImages() {
  std::error_code ec;
  for (const auto& p : paths_) std::filesystem::remove(p, ec);
}

}  // namespace litter
