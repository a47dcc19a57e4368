#include <doctest.h>

#include <random>

#include "litter/error.hpp"
#include "litter/tiling.hpp"
#include "support.hpp"

using namespace litter;
using namespace testing_support;

TEST_CASE("1920x1480 frame, 640x480 window, no overlap") {
  const auto plan = plan_tiles({1920, 1480}, {640, 480, 0.0});
  CHECK(plan.tiles.size() == 12);
  CHECK(plan.column_origins == std::vector<int>{0, 640, 1280});
  CHECK(plan.row_origins == std::vector<int>{0, 333, 667, 1000});
  CHECK(uncovered_pixels(plan) == 0);
  for (std::size_t i = 0; i < plan.tiles.size(); ++i) CHECK(plan.tiles[i].tile_id == static_cast<int>(i));
}

TEST_CASE("default overlap on the default frame") {
  const auto plan = plan_tiles({}, {});
  CHECK(plan.column_origins == std::vector<int>{0, 427, 853, 1280});
  CHECK(plan.row_origins == std::vector<int>{0, 333, 667, 1000});
  CHECK(uncovered_pixels(plan) == 0);
}

TEST_CASE("frame equal to window gives one tile") {
  const auto plan = plan_tiles({640, 480}, {640, 480, 0.3});
  REQUIRE(plan.tiles.size() == 1);
  CHECK(plan.tiles[0] == Tile{0, 0, 0});
}

TEST_CASE("half overlap along one axis") {
  const auto plan = plan_tiles({1280, 480}, {640, 480, 0.5});
  CHECK(plan.column_origins == std::vector<int>{0, 320, 640});
  CHECK(plan.tiles.size() == 3);
}

TEST_CASE("invalid specs") {
  CHECK_THROWS_AS(plan_tiles({600, 480}, {640, 480, 0.0}), TilingError);
  CHECK_THROWS_AS(plan_tiles({640, 480}, {640, 480, 1.0}), TilingError);
  CHECK_THROWS_AS(plan_tiles({640, 480}, {640, 480, -0.1}), TilingError);
  CHECK_THROWS_AS(plan_tiles({640, 480}, {0, 480, 0.0}), TilingError);
}

TEST_CASE("tile_to_frame translation") {
  const WindowSpec w{640, 480, 0.0};
  CHECK(tile_to_frame({{0, 0, 10, 10}, 2, 1.0}, {0, 0, 0}, w).box == BoundingBox{0, 0, 10, 10});
  const auto d = tile_to_frame({{5, 5, 20, 20}, 2, 0.4}, {4, 640, 333}, w);
  CHECK(d.box == BoundingBox{645, 338, 20, 20});
  CHECK(d.class_id == 2);
  CHECK(d.score == 0.4);
  CHECK_THROWS_AS(tile_to_frame({{630, 470, 20, 20}, 2, 1.0}, {0, 0, 0}, w), TilingError);
  CHECK_THROWS_AS(tile_to_frame({{-1, 0, 5, 5}, 2, 1.0}, {0, 0, 0}, w), TilingError);
}

TEST_CASE("tiles_intersecting reference cases") {
  const auto plan = plan_tiles({1920, 1480}, {640, 480, 0.0});
  std::vector<int> all(plan.tiles.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  CHECK(tiles_intersecting({0, 0, 1920, 1480}, plan) == all);
  CHECK(tiles_intersecting({10, 10, 20, 20}, plan) == std::vector<int>{0});
  CHECK(tiles_intersecting({630, 0, 20, 20}, plan) == std::vector<int>{0, 1});
}

TEST_CASE("random plans: coverage, brute-force intersection, round trip, monotonicity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> overlap(0.0, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    const int ww = std::uniform_int_distribution<int>(1, 40)(rng);
    const int wh = std::uniform_int_distribution<int>(1, 40)(rng);
    const FrameSpec f{std::uniform_int_distribution<int>(ww, 150)(rng), std::uniform_int_distribution<int>(wh, 150)(rng)};
    const double o = overlap(rng);
    const auto plan = plan_tiles(f, {ww, wh, o});
    CHECK(uncovered_pixels(plan) == 0);
    CHECK(plan_tiles(f, {ww, wh, o}).tiles == plan.tiles);

    // Adjacent tiles share at least the requested fraction.
    for (std::size_t i = 1; i < plan.column_origins.size(); ++i) {
      const int shared = ww - (plan.column_origins[i] - plan.column_origins[i - 1]);
      CHECK(shared >= o * ww - 1e-9 - 1.0);  // integer rounding may cost at most one pixel
      CHECK(plan.column_origins[i] > plan.column_origins[i - 1]);
    }

    const double o2 = std::min(0.99, o + overlap(rng) * 0.1);
    const auto denser = plan_tiles(f, {ww, wh, o2});
    CHECK(denser.column_origins.size() >= plan.column_origins.size());
    CHECK(denser.row_origins.size() >= plan.row_origins.size());

    const auto box = random_box(rng, f.width, f.height);
    std::vector<int> expected;
    for (const auto& t : plan.tiles) {
      if (raster_intersection(box, plan.extent(t)) > 0) expected.push_back(t.tile_id);
    }
    CHECK(tiles_intersecting(box, plan) == expected);

    const auto& t = plan.tiles[std::uniform_int_distribution<std::size_t>(0, plan.tiles.size() - 1)(rng)];
    const auto local = random_box(rng, ww, wh);
    const auto framed = tile_to_frame({local, 1, 1.0}, t, plan.window);
    CHECK(BoundingBox{framed.box.x - t.origin_x, framed.box.y - t.origin_y, framed.box.w, framed.box.h} == local);
  }
}

TEST_CASE("plan export") {
  const auto text = tile_plan_to_json(plan_tiles({640, 480}, {640, 480, 0.0}), -1);
  CHECK(text.find("\"tiles\":[{\"tile_id\":0,\"origin_x\":0,\"origin_y\":0}]") != std::string::npos);
}
