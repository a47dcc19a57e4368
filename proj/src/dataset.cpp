#include "litter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "litter/error.hpp"
#include "litter/taxonomy.hpp"

namespace litter {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<BoundingBox> FrameRecord::boxes_only() const {
  std::vector<BoundingBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(b.box);
  return out;
}

std::vector<Detection> FrameRecord::detections() const {
  std::vector<Detection> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(b.as_detection());
  return out;
}

std::string validate_box(const BoxRecord& b, int width, int height, const Taxonomy* taxonomy) {
  const auto& r = b.box;
  if (r.w < 1 || r.h < 1) return "box has non-positive size";
  if (r.x < 0 || r.y < 0 || r.right() > width || r.bottom() > height) {
    return "box (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," + std::to_string(r.w) + "," +
           std::to_string(r.h) + ") exceeds the " + std::to_string(width) + "x" + std::to_string(height) + " frame";
  }
  if (b.score && !(*b.score >= 0.0 && *b.score <= 1.0)) return "score outside [0, 1]";
  if (taxonomy != nullptr && !taxonomy->contains(b.class_id)) {
    return "unknown class_id " + std::to_string(b.class_id);
  }
  return {};
}

namespace {

int require_int(const json& obj, const char* key, const std::string& where, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    throw FormatError(line, where + ": field \"" + key + "\" must be an integer");
  }
  const auto v = it->get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw FormatError(line, where + ": field \"" + key + "\" out of range");
  }
  return static_cast<int>(v);
}

double require_number(const json& obj, const char* key, const std::string& where, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw FormatError(line, where + ": field \"" + key + "\" must be a number");
  }
  return it->get<double>();
}

FrameRecord parse_frame(const json& doc, std::size_t frame_index, std::size_t line, const LoadOptions& options,
                        std::vector<std::string>* warnings) {
  const std::string where = "frame " + std::to_string(frame_index);
  if (!doc.is_object()) throw FormatError(line, where + ": expected a JSON object");
  FrameRecord frame;
  const auto path = doc.find("image_path");
  if (path == doc.end() || !path->is_string()) throw FormatError(line, where + ": image_path must be a string");
  frame.image_path = path->get<std::string>();
  frame.width = require_int(doc, "width", where, line);
  frame.height = require_int(doc, "height", where, line);
  if (frame.width < 1 || frame.height < 1) throw FormatError(line, where + ": frame dimensions must be positive");

  if (const auto t = doc.find("capture_time"); t != doc.end() && !t->is_null()) {
    if (!t->is_number()) throw FormatError(line, where + ": capture_time must be a number");
    frame.capture_time = t->get<double>();
  }
  if (const auto p = doc.find("pose"); p != doc.end() && !p->is_null()) {
    if (!p->is_object()) throw FormatError(line, where + ": pose must be an object");
    GeoPose pose{require_number(*p, "lat", where + " pose", line), require_number(*p, "lon", where + " pose", line),
                 require_number(*p, "heading_deg", where + " pose", line)};
    if (pose.lat < -90.0 || pose.lat > 90.0 || pose.lon < -180.0 || pose.lon > 180.0) {
      throw FormatError(line, where + ": pose lat/lon out of range");
    }
    frame.pose = pose;
  }

  const auto boxes = doc.find("boxes");
  if (boxes == doc.end() || !boxes->is_array()) throw FormatError(line, where + ": boxes must be a list");
  frame.boxes.reserve(boxes->size());
  for (std::size_t i = 0; i < boxes->size(); ++i) {
    const auto& item = (*boxes)[i];
    const std::string bwhere = where + " box " + std::to_string(i);
    if (!item.is_object()) throw FormatError(line, bwhere + ": expected an object");
    BoxRecord b;
    b.class_id = require_int(item, "class_id", bwhere, line);
    b.box = {require_int(item, "x", bwhere, line), require_int(item, "y", bwhere, line),
             require_int(item, "w", bwhere, line), require_int(item, "h", bwhere, line)};
    if (const auto s = item.find("score"); s != item.end() && !s->is_null()) {
      if (!s->is_number()) throw FormatError(line, bwhere + ": score must be a number");
      b.score = s->get<double>();
    }
    // Geometry is always enforced; class ids only against the optional taxonomy.
    if (auto err = validate_box(b, frame.width, frame.height, nullptr); !err.empty()) {
      throw FormatError(line, bwhere + ": " + err);
    }
    if (options.taxonomy != nullptr && !options.taxonomy->contains(b.class_id)) {
      const std::string msg = bwhere + ": unknown class_id " + std::to_string(b.class_id);
      if (options.strict) throw FormatError(line, msg);
      if (warnings != nullptr) warnings->push_back("line " + std::to_string(line) + ": " + msg);
    }
    frame.boxes.push_back(b);
  }
  return frame;
}

ordered_json frame_json(const FrameRecord& frame) {
  ordered_json doc;
  doc["image_path"] = frame.image_path;
  doc["width"] = frame.width;
  doc["height"] = frame.height;
  if (frame.capture_time) doc["capture_time"] = *frame.capture_time;
  if (frame.pose) {
    doc["pose"] = {{"lat", frame.pose->lat}, {"lon", frame.pose->lon}, {"heading_deg", frame.pose->heading_deg}};
  }
  auto boxes = ordered_json::array();
  for (const auto& b : frame.boxes) {
    ordered_json item = {
        {"class_id", b.class_id}, {"x", b.box.x}, {"y", b.box.y}, {"w", b.box.w}, {"h", b.box.h}};
    if (b.score) item["score"] = *b.score;
    boxes.push_back(std::move(item));
  }
  doc["boxes"] = std::move(boxes);
  return doc;
}

}  // namespace

std::string frame_to_json(const FrameRecord& frame) { return frame_json(frame).dump(); }

FrameRecord frame_from_json(const std::string& text, std::size_t frame_index, std::size_t line) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(line, std::string("parse failure: ") + e.what());
  }
  return parse_frame(doc, frame_index, line, {}, nullptr);
}

LoadResult load_annotations(std::istream& in, const LoadOptions& options) {
  LoadResult result;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(line, std::string("parse failure: ") + e.what());
    }
    if (!have_header) {
      if (!doc.is_object() || doc.value("format", std::string{}) != kAnnotationFormat) {
        throw FormatError(line, std::string("missing header record with format \"") + kAnnotationFormat + "\"");
      }
      const int version = require_int(doc, "version", "header", line);
      if (version != kAnnotationVersion) {
        throw FormatError(line, "unsupported format version " + std::to_string(version));
      }
      result.manifest.capture_rate = require_number(doc, "capture_rate", "header", line);
      if (!(result.manifest.capture_rate > 0.0)) throw FormatError(line, "capture_rate must be positive");
      have_header = true;
      continue;
    }
    result.manifest.frames.push_back(
        parse_frame(doc, result.manifest.frames.size(), line, options, &result.warnings));
  }
  if (!have_header) throw FormatError(0, "empty file: missing header record");

  const auto& frames = result.manifest.frames;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i - 1].capture_time && frames[i].capture_time && *frames[i].capture_time < *frames[i - 1].capture_time) {
      throw FormatError(0, "frame " + std::to_string(i) + ": capture_time decreases");
    }
  }
  return result;
}

LoadResult load_annotations_file(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError(0, "cannot open " + path.string());
  try {
    return load_annotations(in, options);
  } catch (const FormatError& e) {
    throw FormatError(e.line(), path.string() + ": " + std::string(e.what()));
  }
}

void save_annotations(const SequenceManifest& manifest, std::ostream& out) {
  ordered_json header;
  header["format"] = kAnnotationFormat;
  header["version"] = kAnnotationVersion;
  header["capture_rate"] = manifest.capture_rate;
  out << header.dump() << '\n';
  for (const auto& frame : manifest.frames) out << frame_json(frame).dump() << '\n';
}

void save_annotations_file(const SequenceManifest& manifest, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError(0, "cannot write " + tmp.string());
    save_annotations(manifest, out);
    out.flush();
    if (!out) throw FormatError(0, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SequenceManifest decimate(const SequenceManifest& sequence, double target_rate) {
  if (!(target_rate > 0.0)) throw Error("decimation target rate must be positive");
  // Tolerate rates that only differ from capture_rate by float noise.
  if (target_rate > sequence.capture_rate * (1.0 + 1e-9)) {
    throw Error("decimation target rate exceeds the capture rate");
  }
  const auto k = static_cast<std::size_t>(std::max(1.0, std::round(sequence.capture_rate / target_rate)));
  SequenceManifest out;
  out.capture_rate = sequence.capture_rate / static_cast<double>(k);
  out.frames.reserve(decimated_count(sequence.frames.size(), k));
  for (std::size_t i = 0; i < sequence.frames.size(); i += k) out.frames.push_back(sequence.frames[i]);
  return out;
}

DatasetStats dataset_stats(const SequenceManifest& manifest, const Taxonomy& taxonomy) {
  DatasetStats stats;
  stats.frame_count = manifest.frames.size();
  std::vector<std::size_t> per_frame;
  per_frame.reserve(manifest.frames.size());
  for (const auto& frame : manifest.frames) {
    per_frame.push_back(frame.boxes.size());
    for (const auto& b : frame.boxes) {
      const auto& cls = taxonomy.at(b.class_id);
      ++stats.per_class[cls.name];
      ++stats.per_category[cls.report_category];
      ++stats.box_count;
    }
  }
  if (!per_frame.empty()) {
    std::sort(per_frame.begin(), per_frame.end());
    stats.min_boxes_per_frame = per_frame.front();
    stats.max_boxes_per_frame = per_frame.back();
    stats.mean_boxes_per_frame = static_cast<double>(stats.box_count) / static_cast<double>(per_frame.size());
    const std::size_t mid = per_frame.size() / 2;
    stats.median_boxes_per_frame = per_frame.size() % 2 == 1
                                       ? static_cast<double>(per_frame[mid])
                                       : 0.5 * static_cast<double>(per_frame[mid - 1] + per_frame[mid]);
  }
  return stats;
}

std::string stats_to_json(const DatasetStats& stats, int indent) {
  ordered_json doc;
  doc["frames"] = stats.frame_count;
  doc["boxes"] = stats.box_count;
  doc["per_class"] = stats.per_class;
  doc["per_category"] = stats.per_category;
  doc["boxes_per_frame"] = {{"min", stats.min_boxes_per_frame},
                            {"max", stats.max_boxes_per_frame},
                            {"mean", stats.mean_boxes_per_frame},
                            {"median", stats.median_boxes_per_frame}};
  return doc.dump(indent);
}

}  // namespace litter
