#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include <unistd.h>

#include <nlohmann/json.hpp>

namespace testing_support {

std::int64_t raster_intersection(const BoundingBox& a, const BoundingBox& b) {
  std::int64_t n = 0;
  for (int y = a.y; y < a.y + a.h; ++y) {
    for (int x = a.x; x < a.x + a.w; ++x) {
      if (x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h) ++n;
    }
  }
  return n;
}

std::vector<std::uint8_t> raster_mask(const std::vector<BoundingBox>& boxes, int width, int height) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  for (const auto& b : boxes) {
    for (int y = b.y; y < b.y + b.h; ++y) {
      for (int x = b.x; x < b.x + b.w; ++x) mask[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return mask;
}

std::int64_t uncovered_pixels(const litter::TilePlan& plan) {
  std::vector<BoundingBox> extents;
  for (const auto& t : plan.tiles) extents.push_back(plan.extent(t));
  // Tiles may not leave the frame; clip defensively so the mask stays in range
  // and count any escape as a failure separately.
  for (const auto& e : extents) {
    if (e.x < 0 || e.y < 0 || e.x + e.w > plan.frame.width || e.y + e.h > plan.frame.height) return -1;
  }
  const auto mask = raster_mask(extents, plan.frame.width, plan.frame.height);
  return std::count(mask.begin(), mask.end(), std::uint8_t{0});
}

OracleMatch oracle_match(const std::vector<Detection>& dets, const std::vector<BoundingBox>& gts,
                         std::int64_t iou_num, std::int64_t iou_den) {
  std::vector<bool> visited(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  OracleMatch out;
  for (std::size_t step = 0; step < dets.size(); ++step) {
    std::size_t pick = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (visited[i]) continue;
      if (pick == dets.size()) {
        pick = i;
        continue;
      }
      const auto& c = dets[i];
      const auto& p = dets[pick];
      bool better = false;
      if (c.score != p.score) {
        better = c.score > p.score;
      } else if (c.box.y != p.box.y) {
        better = c.box.y < p.box.y;
      } else if (c.box.x != p.box.x) {
        better = c.box.x < p.box.x;
      } else if (c.box.w != p.box.w) {
        better = c.box.w < p.box.w;
      } else if (c.box.h != p.box.h) {
        better = c.box.h < p.box.h;
      }
      if (better) pick = i;
    }
    visited[pick] = true;

    const BoundingBox& d = dets[pick].box;
    std::size_t best = gts.size();
    std::int64_t best_i = 0;
    std::int64_t best_u = 1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const std::int64_t inter = raster_intersection(d, gts[g]);
      if (inter == 0) continue;
      const std::int64_t uni = std::int64_t{d.w} * d.h + std::int64_t{gts[g].w} * gts[g].h - inter;
      if (inter * iou_den < iou_num * uni) continue;
      if (best == gts.size() || inter * best_u > best_i * uni) {
        best = g;
        best_i = inter;
        best_u = uni;
      }
    }
    if (best == gts.size()) {
      ++out.false_positives;
    } else {
      taken[best] = true;
      ++out.correct;
    }
  }
  return out;
}

namespace {

std::int64_t overlap_pixels(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t w = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const std::int64_t h = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return (w > 0 && h > 0) ? w * h : 0;
}

}  // namespace

std::vector<Detection> oracle_merge(std::vector<Detection> dets, double threshold, bool over_smaller) {
  for (;;) {
    const std::size_t n = dets.size();
    std::vector<std::vector<bool>> link(n, std::vector<bool>(n, false));
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (dets[i].class_id != dets[j].class_id) continue;
        const double inter = static_cast<double>(overlap_pixels(dets[i].box, dets[j].box));
        const double ai = static_cast<double>(dets[i].box.w) * dets[i].box.h;
        const double aj = static_cast<double>(dets[j].box.w) * dets[j].box.h;
        const double v = over_smaller ? inter / std::min(ai, aj) : inter / (ai + aj - inter);
        if (v > threshold) link[i][j] = link[j][i] = any = true;
      }
    }
    if (!any) break;
    std::vector<int> comp(n, -1);
    std::vector<Detection> next;
    for (std::size_t s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      const int id = static_cast<int>(next.size());
      std::vector<std::size_t> stack{s};
      comp[s] = id;
      Detection acc = dets[s];
      while (!stack.empty()) {
        const auto k = stack.back();
        stack.pop_back();
        const int x0 = std::min(acc.box.x, dets[k].box.x);
        const int y0 = std::min(acc.box.y, dets[k].box.y);
        const int x1 = std::max(acc.box.x + acc.box.w, dets[k].box.x + dets[k].box.w);
        const int y1 = std::max(acc.box.y + acc.box.h, dets[k].box.y + dets[k].box.h);
        acc.box = {x0, y0, x1 - x0, y1 - y0};
        acc.score = std::max(acc.score, dets[k].score);
        for (std::size_t m = 0; m < n; ++m) {
          if (link[k][m] && comp[m] < 0) {
            comp[m] = id;
            stack.push_back(m);
          }
        }
      }
      next.push_back(acc);
    }
    dets = std::move(next);
  }
  std::sort(dets.begin(), dets.end(), litter::detection_less);
  return dets;
}

std::vector<std::vector<std::size_t>> oracle_cells(const std::vector<BoundingBox>& boxes, int cols, int rows,
                                                   int cell) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const BoundingBox region{c * cell, r * cell, cell, cell};
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (overlap_pixels(region, boxes[i]) > 0) out[static_cast<std::size_t>(r) * cols + c].push_back(i);
      }
    }
  }
  return out;
}

BoundingBox random_box(std::mt19937_64& rng, int width, int height, int max_side) {
  const int mw = max_side > 0 ? std::min(max_side, width) : width;
  const int mh = max_side > 0 ? std::min(max_side, height) : height;
  const int w = std::uniform_int_distribution<int>(1, mw)(rng);
  const int h = std::uniform_int_distribution<int>(1, mh)(rng);
  const int x = std::uniform_int_distribution<int>(0, width - w)(rng);
  const int y = std::uniform_int_distribution<int>(0, height - h)(rng);
  return {x, y, w, h};
}

bool straddles(const BoundingBox& box, const litter::TilePlan& plan) {
  for (const auto& t : plan.tiles) {
    const auto e = plan.extent(t);
    if (overlap_pixels(e, box) > 0 && !e.contains(box)) return true;
  }
  return false;
}

litter::SequenceManifest synthetic_manifest(const SyntheticOptions& o) {
  const auto plan = litter::plan_tiles(o.frame, o.window);
  // Interior tile edges: positions where some tile starts or ends inside the frame.
  std::vector<int> xs;
  std::vector<int> ys;
  for (int c : plan.column_origins) {
    if (c > 0) xs.push_back(c);
    if (c + o.window.width < o.frame.width) xs.push_back(c + o.window.width);
  }
  for (int r : plan.row_origins) {
    if (r > 0) ys.push_back(r);
    if (r + o.window.height < o.frame.height) ys.push_back(r + o.window.height);
  }

  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> side(o.min_side, o.max_side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_class(0, o.class_ids.size() - 1);

  litter::SequenceManifest m;
  m.capture_rate = 2.0;
  for (std::size_t f = 0; f < o.frames; ++f) {
    litter::FrameRecord rec;
    rec.image_path = "frame_" + std::to_string(f) + ".png";
    rec.width = o.frame.width;
    rec.height = o.frame.height;
    rec.capture_time = static_cast<double>(f) / m.capture_rate;
    if (o.with_pose) rec.pose = litter::GeoPose{45.0 + 1e-5 * f, 7.0 + 2e-5 * f, 30.0};
    int attempts = 0;
    while (static_cast<int>(rec.boxes.size()) < o.boxes_per_frame && attempts++ < 10000) {
      const int w = side(rng);
      const int h = side(rng);
      int x = std::uniform_int_distribution<int>(0, o.frame.width - w)(rng);
      int y = std::uniform_int_distribution<int>(0, o.frame.height - h)(rng);
      if (unit(rng) < o.straddle_fraction) {
        // Centre the box roughly on an interior edge, on one or both axes.
        const int mode = std::uniform_int_distribution<int>(0, 2)(rng);
        if ((mode == 0 || mode == 2) && !xs.empty()) {
          const int e = xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
          x = e - std::uniform_int_distribution<int>(1, w - 1)(rng);
        }
        if ((mode == 1 || mode == 2) && !ys.empty()) {
          const int e = ys[std::uniform_int_distribution<std::size_t>(0, ys.size() - 1)(rng)];
          y = e - std::uniform_int_distribution<int>(1, h - 1)(rng);
        }
        x = std::clamp(x, 0, o.frame.width - w);
        y = std::clamp(y, 0, o.frame.height - h);
      }
      const BoundingBox b{x, y, w, h};
      const bool clash = std::any_of(rec.boxes.begin(), rec.boxes.end(),
                                     [&](const litter::BoxRecord& r) { return overlap_pixels(r.box, b) > 0; });
      if (clash) continue;
      rec.boxes.push_back({o.class_ids[pick_class(rng)], b, std::nullopt});
    }
    m.frames.push_back(std::move(rec));
  }
  return m;
}

// ---- GeoJSON -------------------------------------------------------------

namespace {

using nlohmann::json;

std::string check_position(const json& p, double& lon, double& lat) {
  if (!p.is_array() || p.size() < 2 || p.size() > 3) return "position must be an array of 2 or 3 numbers";
  for (const auto& v : p) {
    if (!v.is_number()) return "position member is not a number";
    if (!std::isfinite(v.get<double>())) return "position member is not finite";
  }
  lon = p[0].get<double>();
  lat = p[1].get<double>();
  if (lon < -180.0 || lon > 180.0) return "longitude out of range";
  if (lat < -90.0 || lat > 90.0) return "latitude out of range";
  return {};
}

bool segments_cross(double ax, double ay, double bx, double by, double cx, double cy, double dx, double dy) {
  auto orient = [](double px, double py, double qx, double qy, double rx, double ry) {
    const double v = (qx - px) * (ry - py) - (qy - py) * (rx - px);
    return (v > 0) - (v < 0);
  };
  const int o1 = orient(ax, ay, bx, by, cx, cy);
  const int o2 = orient(ax, ay, bx, by, dx, dy);
  const int o3 = orient(cx, cy, dx, dy, ax, ay);
  const int o4 = orient(cx, cy, dx, dy, bx, by);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

std::string check_ring(const json& ring, bool exterior) {
  if (!ring.is_array()) return "linear ring is not an array";
  if (ring.size() < 4) return "linear ring has fewer than 4 positions";
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : ring) {
    double lon = 0;
    double lat = 0;
    if (auto err = check_position(p, lon, lat); !err.empty()) return err;
    pts.emplace_back(lon, lat);
  }
  if (ring.front() != ring.back()) return "linear ring is not closed";
  double twice_area = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    twice_area += pts[i].first * pts[i + 1].second - pts[i + 1].first * pts[i].second;
  }
  if (twice_area == 0.0) return "linear ring has zero area";
  if (exterior && twice_area < 0) return "exterior ring is clockwise";
  if (!exterior && twice_area > 0) return "interior ring is counter-clockwise";
  const std::size_t n = pts.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(pts[i].first, pts[i].second, pts[i + 1].first, pts[i + 1].second, pts[j].first,
                         pts[j].second, pts[j + 1].first, pts[j + 1].second)) {
        return "linear ring self-intersects";
      }
    }
  }
  return {};
}

std::string check_geometry(const json& g) {
  if (g.is_null()) return {};
  if (!g.is_object()) return "geometry must be an object or null";
  if (!g.contains("type") || !g["type"].is_string()) return "geometry lacks a type";
  if (g["type"] != "Polygon") return "unexpected geometry type " + g["type"].get<std::string>();
  if (!g.contains("coordinates") || !g["coordinates"].is_array()) return "polygon lacks coordinates";
  const auto& rings = g["coordinates"];
  if (rings.empty()) return "polygon has no rings";
  for (std::size_t i = 0; i < rings.size(); ++i) {
    if (auto err = check_ring(rings[i], i == 0); !err.empty()) return err;
  }
  return {};
}

}  // namespace

std::string validate_geojson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    return std::string("not JSON: ") + e.what();
  }
  if (!doc.is_object()) return "top level is not an object";
  if (doc.value("type", json()) != "FeatureCollection") return "top-level type is not FeatureCollection";
  if (doc.contains("crs")) return "crs member is not allowed";
  if (!doc.contains("features") || !doc["features"].is_array()) return "features is not an array";
  for (std::size_t i = 0; i < doc["features"].size(); ++i) {
    const auto& f = doc["features"][i];
    const std::string where = "feature " + std::to_string(i) + ": ";
    if (!f.is_object()) return where + "not an object";
    if (f.value("type", json()) != "Feature") return where + "type is not Feature";
    if (!f.contains("geometry")) return where + "missing geometry";
    if (!f.contains("properties")) return where + "missing properties";
    if (!f["properties"].is_object() && !f["properties"].is_null()) return where + "properties not an object";
    if (auto err = check_geometry(f["geometry"]); !err.empty()) return where + err;
  }
  return {};
}

TempDir::TempDir(const std::string& tag) {
  std::string templ = (std::filesystem::temp_directory_path() / ("litter-test-" + tag + "-XXXXXX")).string();
  if (::mkdtemp(templ.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace testing_support
