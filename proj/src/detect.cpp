#include "litter/detect.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "litter/error.hpp"
#include "litter/external_detector.hpp"

namespace litter {

std::vector<std::vector<std::size_t>> assign_cells(std::span<const BoundingBox> boxes, const GridSpec& grid) {
  if (grid.cols < 1 || grid.rows < 1 || grid.cell_size < 1) throw Error("grid dimensions must be positive");
  const BoundingBox window{0, 0, grid.window_width(), grid.window_height()};
  std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoundingBox& b = boxes[i];
    if (!b.valid() || !window.contains(b)) {
      throw Error("box " + std::to_string(i) + " lies outside the " + std::to_string(window.w) + "x" +
                  std::to_string(window.h) + " window");
    }
    // Cells touched along each axis: [floor(x / s), floor((x + w - 1) / s)].
    const int c0 = b.x / grid.cell_size;
    const int c1 = (b.right() - 1) / grid.cell_size;
    const int r0 = b.y / grid.cell_size;
    const int r1 = (b.bottom() - 1) / grid.cell_size;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) cells[static_cast<std::size_t>(r) * grid.cols + c].push_back(i);
    }
  }
  return cells;
}

std::vector<Detection> replay_detect(std::span<const BoxRecord> annotations, const TilePlan& plan, int tile_id) {
  const Tile& tile = plan.tile(tile_id);
  const BoundingBox extent = plan.extent(tile);
  std::vector<Detection> out;
  for (const auto& a : annotations) {
    const auto clipped = intersection(a.box, extent);
    if (!clipped) continue;
    BoundingBox local = *clipped;
    local.x -= tile.origin_x;
    local.y -= tile.origin_y;
    out.push_back({local, a.class_id, 1.0});
  }
  return out;
}

std::vector<Detection> ReplayDetector::detect_tile(const TileInput& input) {
  return replay_detect(input.frame->boxes, *input.plan, input.tile_id);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double sample_score(const ScoreDistribution& dist, std::mt19937_64& rng) {
  double s = 1.0;
  switch (dist.kind) {
    case ScoreDistribution::Kind::constant:
      s = dist.a;
      break;
    case ScoreDistribution::Kind::uniform:
      s = std::uniform_real_distribution<double>(dist.a, dist.b)(rng);
      break;
    case ScoreDistribution::Kind::beta: {
      const double x = std::gamma_distribution<double>(dist.a, 1.0)(rng);
      const double y = std::gamma_distribution<double>(dist.b, 1.0)(rng);
      s = (x + y) > 0.0 ? x / (x + y) : 0.5;
      break;
    }
  }
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

JitterDecision jitter_decision(const JitterParams& params, std::size_t frame_index, std::size_t box_index) {
  std::uint64_t key = splitmix64(params.seed);
  key = splitmix64(key ^ static_cast<std::uint64_t>(frame_index));
  key = splitmix64(key ^ static_cast<std::uint64_t>(box_index));
  std::mt19937_64 rng(key);

  JitterDecision d;
  d.dropped = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < params.drop_rate;
  if (params.shift_sigma > 0.0) {
    std::normal_distribution<double> shift(0.0, params.shift_sigma);
    d.dx = static_cast<int>(std::lround(shift(rng)));
    d.dy = static_cast<int>(std::lround(shift(rng)));
  }
  d.score = sample_score(params.score, rng);
  return d;
}

std::vector<Detection> jitter_detect(std::span<const BoxRecord> annotations, const TilePlan& plan, int tile_id,
                                     const JitterParams& params, std::size_t frame_index) {
  const Tile& tile = plan.tile(tile_id);
  const BoundingBox extent = plan.extent(tile);
  std::vector<Detection> out;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto d = jitter_decision(params, frame_index, i);
    if (d.dropped) continue;
    BoundingBox moved = annotations[i].box;
    // Shift, then keep the whole box inside the frame.
    moved.x = std::clamp(moved.x + d.dx, 0, std::max(0, plan.frame.width - moved.w));
    moved.y = std::clamp(moved.y + d.dy, 0, std::max(0, plan.frame.height - moved.h));
    const auto clipped = intersection(moved, extent);
    if (!clipped) continue;
    BoundingBox local = *clipped;
    local.x -= tile.origin_x;
    local.y -= tile.origin_y;
    out.push_back({local, annotations[i].class_id, d.score});
  }
  return out;
}

JitterDetector::JitterDetector(JitterParams params) : params_(params) {}

std::vector<Detection> JitterDetector::detect_tile(const TileInput& input) {
  return jitter_detect(input.frame->boxes, *input.plan, input.tile_id, params_, input.frame_index);
}

void validate(const DetectorConfig& config) {
  const auto& j = config.jitter;
  if (!(j.drop_rate >= 0.0 && j.drop_rate <= 1.0)) throw Error("jitter drop_rate must lie in [0, 1]");
  if (!(j.shift_sigma >= 0.0)) throw Error("jitter shift_sigma must be non-negative");
  if (j.score.kind == ScoreDistribution::Kind::beta && !(j.score.a > 0.0 && j.score.b > 0.0)) {
    throw Error("beta score distribution needs positive shape parameters");
  }
  if (j.score.kind == ScoreDistribution::Kind::uniform && !(j.score.a <= j.score.b)) {
    throw Error("uniform score distribution needs a <= b");
  }
  if (config.kind == DetectorConfig::Kind::external) {
    if (config.external.command.empty()) throw Error("external detector needs a command");
    if (!(config.external.timeout_s > 0.0)) throw Error("external detector timeout must be positive");
    if (config.external.workers < 1) throw Error("external detector needs at least one worker");
  }
}

std::unique_ptr<Detector> make_detector(const DetectorConfig& config) {
  validate(config);
  switch (config.kind) {
    case DetectorConfig::Kind::replay:
      return std::make_unique<ReplayDetector>();
    case DetectorConfig::Kind::jitter:
      return std::make_unique<JitterDetector>(config.jitter);
    case DetectorConfig::Kind::external:
      return std::make_unique<ExternalDetector>(config.external);
  }
  throw Error("unknown detector kind");
}

DetectorConfig::Kind parse_detector_kind(const std::string& name) {
  if (name == "replay") return DetectorConfig::Kind::replay;
  if (name == "jitter") return DetectorConfig::Kind::jitter;
  if (name == "external") return DetectorConfig::Kind::external;
  throw Error("unknown detector kind \"" + name + "\" (expected replay, jitter or external)");
}

const char* to_string(DetectorConfig::Kind kind) {
  switch (kind) {
    case DetectorConfig::Kind::replay:
      return "replay";
    case DetectorConfig::Kind::jitter:
      return "jitter";
    case DetectorConfig::Kind::external:
      return "external";
  }
  return "unknown";
}

}  // namespace litter
