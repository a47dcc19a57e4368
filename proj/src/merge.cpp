#include "litter/merge.hpp"

#include <algorithm>
#include <numeric>

#include "litter/error.hpp"

namespace litter {

double overlap(const BoundingBox& a, const BoundingBox& b, OverlapMeasure measure) noexcept {
  return measure == OverlapMeasure::iou ? iou(a, b) : overlap_over_smaller(a, b);
}

void validate(const MergeConfig& config) {
  if (!(config.overlap_threshold > 0.0 && config.overlap_threshold <= 1.0)) {
    throw Error("merge overlap_threshold must lie in (0, 1]");
  }
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;

  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }

  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

// One pass of component fusion over a single class. Returns true if anything merged.
bool fuse_once(std::vector<Detection>& dets, const MergeConfig& config) {
  // Sweep in x so only horizontally overlapping pairs are tested.
  std::sort(dets.begin(), dets.end(), detection_less);
  std::vector<std::size_t> by_x(dets.size());
  std::iota(by_x.begin(), by_x.end(), std::size_t{0});
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].box.x != dets[b].box.x ? dets[a].box.x < dets[b].box.x : a < b;
  });

  DisjointSets sets(dets.size());
  bool merged = false;
  for (std::size_t i = 0; i < by_x.size(); ++i) {
    const BoundingBox& a = dets[by_x[i]].box;
    for (std::size_t j = i + 1; j < by_x.size(); ++j) {
      const BoundingBox& b = dets[by_x[j]].box;
      if (b.x >= a.right()) break;
      if (overlap(a, b, config.overlap_measure) > config.overlap_threshold) {
        merged |= sets.unite(by_x[i], by_x[j]);
      }
    }
  }
  if (!merged) return false;

  std::vector<Detection> fused;
  std::vector<std::ptrdiff_t> slot(dets.size(), -1);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const std::size_t root = sets.find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(fused.size());
      fused.push_back(dets[i]);
      continue;
    }
    Detection& target = fused[static_cast<std::size_t>(slot[root])];
    target.box = union_box(target.box, dets[i].box);
    target.score = std::max(target.score, dets[i].score);
  }
  dets = std::move(fused);
  return true;
}

}  // namespace

std::vector<Detection> merge_detections(std::span<const Detection> detections, const MergeConfig& config) {
  validate(config);
  std::vector<Detection> sorted(detections.begin(), detections.end());
  std::sort(sorted.begin(), sorted.end(), detection_less);

  std::vector<Detection> out;
  out.reserve(sorted.size());
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].class_id == sorted[begin].class_id) ++end;
    std::vector<Detection> group(sorted.begin() + static_cast<std::ptrdiff_t>(begin),
                                 sorted.begin() + static_cast<std::ptrdiff_t>(end));
    while (fuse_once(group, config)) {
    }
    out.insert(out.end(), group.begin(), group.end());
    begin = end;
  }
  std::sort(out.begin(), out.end(), detection_less);
  return out;
}

OverlapMeasure parse_overlap_measure(const std::string& name) {
  if (name == "iou") return OverlapMeasure::iou;
  if (name == "over_smaller") return OverlapMeasure::over_smaller;
  throw Error("unknown overlap measure \"" + name + "\" (expected iou or over_smaller)");
}

const char* to_string(OverlapMeasure measure) {
  return measure == OverlapMeasure::iou ? "iou" : "over_smaller";
}

}  // namespace litter
