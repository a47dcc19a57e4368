#include "litter/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "litter/dataset.hpp"
#include "litter/error.hpp"
#include "litter/taxonomy.hpp"

namespace litter {

MatchResult match_detections(std::span<const Detection> detections, std::span<const BoundingBox> ground_truth,
                             double iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.score != db.score) return da.score > db.score;
    return box_less(da.box, db.box);
  });

  MatchResult result;
  result.ground_truth = static_cast<std::int64_t>(ground_truth.size());
  std::vector<bool> taken(ground_truth.size(), false);
  for (std::size_t di : order) {
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t gi = 0; gi < ground_truth.size(); ++gi) {
      if (taken[gi]) continue;
      const double v = iou(detections[di].box, ground_truth[gi]);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_gt = gi;
      }
    }
    if (best >= 0.0) {
      taken[best_gt] = true;
      result.pairs.emplace_back(di, best_gt);
      ++result.correct;
    } else {
      ++result.false_positives;
    }
  }
  return result;
}

PrecisionRecall precision_recall(const Counts& c) noexcept {
  PrecisionRecall pr;
  if (c.correct + c.false_positives > 0) {
    pr.precision = static_cast<double>(c.correct) / static_cast<double>(c.correct + c.false_positives);
  }
  if (c.ground_truth > 0) pr.recall = static_cast<double>(c.correct) / static_cast<double>(c.ground_truth);
  return pr;
}

PrecisionRecall precision_recall(const MatchResult& m) noexcept {
  return precision_recall(Counts{m.correct, m.false_positives, m.ground_truth});
}

Counts pixel_mask_counts(std::span<const Detection> detections, std::span<const BoundingBox> ground_truth,
                         const FrameSpec& frame) {
  const BoundingBox bounds{0, 0, frame.width, frame.height};
  std::vector<int> xs;
  std::vector<int> ys;
  xs.reserve(2 * (detections.size() + ground_truth.size()));
  ys.reserve(xs.capacity());
  auto add_edges = [&](const BoundingBox& b) {
    if (!b.valid() || !bounds.contains(b)) throw Error("box outside the frame in pixel-mask evaluation");
    xs.push_back(b.x);
    xs.push_back(b.right());
    ys.push_back(b.y);
    ys.push_back(b.bottom());
  };
  for (const auto& d : detections) add_edges(d.box);
  for (const auto& g : ground_truth) add_edges(g);
  if (xs.empty()) return {};

  // Compress to the grid spanned by box edges; each grid cell is uniformly
  // inside or outside every box, so coverage is exact.
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const std::size_t nx = xs.size() - 1;
  const std::size_t ny = ys.size() - 1;
  if (nx == 0 || ny == 0) return {};

  // bit 0: detection mask, bit 1: ground-truth mask
  std::vector<std::uint8_t> cells(nx * ny, 0);
  auto paint = [&](const BoundingBox& b, std::uint8_t bit) {
    const auto x0 = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), b.x) - xs.begin());
    const auto x1 = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), b.right()) - xs.begin());
    const auto y0 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), b.y) - ys.begin());
    const auto y1 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), b.bottom()) - ys.begin());
    for (std::size_t y = y0; y < y1; ++y) {
      std::uint8_t* row = cells.data() + y * nx;
      for (std::size_t x = x0; x < x1; ++x) row[x] |= bit;
    }
  };
  for (const auto& d : detections) paint(d.box, 1);
  for (const auto& g : ground_truth) paint(g, 2);

  std::int64_t det = 0;
  std::int64_t gt = 0;
  std::int64_t both = 0;
  for (std::size_t y = 0; y < ny; ++y) {
    const std::int64_t dy = ys[y + 1] - ys[y];
    const std::uint8_t* row = cells.data() + y * nx;
    for (std::size_t x = 0; x < nx; ++x) {
      if (row[x] == 0) continue;
      const std::int64_t area = dy * (xs[x + 1] - xs[x]);
      if (row[x] & 1) det += area;
      if (row[x] & 2) gt += area;
      if (row[x] == 3) both += area;
    }
  }
  return {both, det - both, gt};
}

PrecisionRecall pixel_mask_pr(std::span<const Detection> detections, std::span<const BoundingBox> ground_truth,
                              const FrameSpec& frame) {
  return precision_recall(pixel_mask_counts(detections, ground_truth, frame));
}

Counts evaluate_counts(std::span<const FrameSample> frames, EvalMethod method, double threshold,
                       double iou_threshold) {
  Counts total;
  std::vector<Detection> kept;
  for (const auto& f : frames) {
    kept.clear();
    for (const auto& d : f.detections) {
      if (d.score >= threshold) kept.push_back(d);
    }
    if (method == EvalMethod::box) {
      const auto m = match_detections(kept, f.ground_truth, iou_threshold);
      total += Counts{m.correct, m.false_positives, m.ground_truth};
    } else {
      total += pixel_mask_counts(kept, f.ground_truth, f.frame);
    }
  }
  return total;
}

std::vector<PRPoint> pr_curve(std::span<const FrameSample> frames, EvalMethod method, double iou_threshold,
                              std::span<const double> thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw Error("PR thresholds must be strictly increasing");
  }
  std::vector<PRPoint> points;
  points.reserve(thresholds.size());
  for (double t : thresholds) {
    const Counts c = evaluate_counts(frames, method, t, iou_threshold);
    points.push_back({t, precision_recall(c), c});
  }
  return points;
}

EvalMethod EvalConfig::method_for(const std::string& group) const {
  const auto it = methods.find(group);
  return it == methods.end() ? default_method : it->second;
}

std::vector<double> EvalConfig::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(i / 20.0);
  return t;
}

std::map<std::string, std::vector<FrameSample>> group_samples(const SequenceManifest& ground_truth,
                                                              const SequenceManifest& detections,
                                                              const Taxonomy& taxonomy, bool by_category) {
  if (ground_truth.frames.size() != detections.frames.size()) {
    throw Error("ground truth has " + std::to_string(ground_truth.frames.size()) + " frames, detections have " +
                std::to_string(detections.frames.size()));
  }
  auto group_of = [&](int class_id) -> const std::string& {
    const auto& cls = taxonomy.at(class_id);
    return by_category ? cls.report_category : cls.name;
  };

  std::map<std::string, std::vector<FrameSample>> groups;
  for (std::size_t i = 0; i < ground_truth.frames.size(); ++i) {
    const auto& g = ground_truth.frames[i];
    const auto& d = detections.frames[i];
    if (g.image_path != d.image_path || g.width != d.width || g.height != d.height) {
      throw Error("frame " + std::to_string(i) + ": detections refer to a different image than the ground truth");
    }
    std::map<std::string, FrameSample> per_frame;
    auto sample = [&](const std::string& name) -> FrameSample& {
      auto [it, inserted] = per_frame.try_emplace(name);
      if (inserted) it->second.frame = {g.width, g.height};
      return it->second;
    };
    for (const auto& b : g.boxes) sample(group_of(b.class_id)).ground_truth.push_back(b.box);
    for (const auto& b : d.boxes) sample(group_of(b.class_id)).detections.push_back(b.as_detection());
    for (auto& [name, s] : per_frame) groups[name].push_back(std::move(s));
  }
  return groups;
}

CategoryReport evaluate_group(std::span<const FrameSample> frames, const std::string& name, EvalMethod method,
                              const EvalConfig& config) {
  CategoryReport report;
  report.name = name;
  report.method = method;
  report.points = pr_curve(frames, method, config.iou_threshold, config.thresholds);
  if (!report.points.empty()) report.counts = report.points.front().counts;
  return report;
}

EvalReport evaluate(const SequenceManifest& ground_truth, const SequenceManifest& detections,
                    const Taxonomy& taxonomy, const EvalConfig& config) {
  const auto groups = group_samples(ground_truth, detections, taxonomy, config.by_category);
  std::vector<std::string> order;
  if (config.by_category) {
    order = taxonomy.report_categories();
  } else {
    for (const auto& c : taxonomy.classes()) order.push_back(c.name);
  }
  EvalReport report;
  for (const auto& name : order) {
    const auto it = groups.find(name);
    if (it == groups.end()) continue;
    report.categories.push_back(evaluate_group(it->second, name, config.method_for(name), config));
  }
  return report;
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string report_to_json(const EvalReport& report, int indent) {
  using ordered_json = nlohmann::ordered_json;
  auto categories = ordered_json::array();
  for (const auto& c : report.categories) {
    auto points = ordered_json::array();
    for (const auto& p : c.points) {
      points.push_back({{"threshold", p.threshold},
                        {"precision", optional_number(p.pr.precision)},
                        {"recall", optional_number(p.pr.recall)},
                        {"cd", p.counts.correct},
                        {"fp", p.counts.false_positives},
                        {"n", p.counts.ground_truth}});
    }
    categories.push_back({{"name", c.name},
                          {"method", to_string(c.method)},
                          {"points", std::move(points)},
                          {"cd", c.counts.correct},
                          {"fp", c.counts.false_positives},
                          {"n", c.counts.ground_truth}});
  }
  ordered_json doc;
  doc["per_category"] = std::move(categories);
  return doc.dump(indent);
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "category,threshold,precision,recall\n";
  for (const auto& c : report.categories) {
    for (const auto& p : c.points) {
      char t[32];
      std::snprintf(t, sizeof(t), "%.6f", p.threshold);
      out << csv_field(c.name) << ',' << t << ',' << csv_number(p.pr.precision) << ','
          << csv_number(p.pr.recall) << '\n';
    }
  }
  return out.str();
}

EvalMethod parse_eval_method(const std::string& name) {
  if (name == "box") return EvalMethod::box;
  if (name == "pixel") return EvalMethod::pixel;
  throw Error("unknown evaluation method \"" + name + "\" (expected box or pixel)");
}

const char* to_string(EvalMethod method) { return method == EvalMethod::box ? "box" : "pixel"; }

}  // namespace litter
