#include "litter/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "litter/error.hpp"
#include "litter/tile_images.hpp"

namespace litter {

using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error("config: " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (const auto it = obj.find(key); it != obj.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw Error(std::string("config: bad value for \"") + key + "\"");
    }
  }
}

ScoreDistribution::Kind parse_score_kind(const std::string& name) {
  if (name == "uniform") return ScoreDistribution::Kind::uniform;
  if (name == "beta") return ScoreDistribution::Kind::beta;
  if (name == "constant") return ScoreDistribution::Kind::constant;
  throw Error("config: unknown score distribution \"" + name + "\"");
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Stops handing out
// work after the first failure and rethrows the failure with the lowest index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mutex;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto body = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
        failed = true;
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

std::string frame_label(std::size_t index, const FrameRecord& frame) {
  return "frame " + std::to_string(index) + " (" + frame.image_path + ")";
}

// Tile-coordinate detections checked against the contract and mapped to the frame.
std::vector<Detection> collect_tile(Detector& detector, const TileInput& input, const Taxonomy& taxonomy,
                                    std::atomic<std::int64_t>& detector_ns) {
  const auto t0 = std::chrono::steady_clock::now();
  auto raw = detector.detect_tile(input);
  detector_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();

  const Tile& tile = input.plan->tile(input.tile_id);
  std::vector<Detection> out;
  out.reserve(raw.size());
  for (const auto& d : raw) {
    if (!taxonomy.contains(d.class_id)) {
      throw DetectorError(input.tile_id, "detection with unknown class_id " + std::to_string(d.class_id));
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw DetectorError(input.tile_id, "detection score outside [0, 1]");
    try {
      out.push_back(tile_to_frame(d, tile, input.plan->window));
    } catch (const TilingError& e) {
      throw DetectorError(input.tile_id, e.what());
    }
  }
  return out;
}

FrameRecord finalize_frame(const FrameRecord& source, std::vector<std::vector<Detection>>& per_tile,
                           const MergeConfig& merge) {
  std::vector<Detection> all;
  for (auto& t : per_tile) all.insert(all.end(), t.begin(), t.end());
  const auto merged = merge_detections(all, merge);

  FrameRecord out;
  out.image_path = source.image_path;
  out.width = source.width;
  out.height = source.height;
  out.capture_time = source.capture_time;
  out.pose = source.pose;
  out.boxes.reserve(merged.size());
  for (const auto& d : merged) out.boxes.push_back({d.class_id, d.box, d.score});
  return out;
}

std::filesystem::path resolve_image(const std::filesystem::path& root, const std::string& image_path) {
  const std::filesystem::path p(image_path);
  return p.is_absolute() || root.empty() ? p : root / p;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::filesystem::path& requested) {
    if (!requested.empty()) {
      path_ = requested;
      std::filesystem::create_directories(path_);
      return;
    }
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("litter-tiles-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
    owned_ = true;
  }
  ~ScratchDir() {
    std::error_code ec;
    if (owned_) std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  bool owned_ = false;
};

}  // namespace

PipelineConfig pipeline_config_from_json(const json& doc) {
  check_keys(doc, "config",
             {"window", "merge", "detector", "eval", "taxonomy", "workers", "chunk_frames", "scratch_dir",
              "footprint", "cell_size_m"});
  PipelineConfig c;
  if (const auto w = doc.find("window"); w != doc.end()) {
    check_keys(*w, "window", {"width", "height", "min_overlap"});
    read(*w, "width", c.window.width);
    read(*w, "height", c.window.height);
    read(*w, "min_overlap", c.window.min_overlap);
  }
  if (const auto m = doc.find("merge"); m != doc.end()) {
    check_keys(*m, "merge", {"overlap_threshold", "overlap_measure"});
    read(*m, "overlap_threshold", c.merge.overlap_threshold);
    std::string measure = to_string(c.merge.overlap_measure);
    read(*m, "overlap_measure", measure);
    c.merge.overlap_measure = parse_overlap_measure(measure);
  }
  if (const auto d = doc.find("detector"); d != doc.end()) {
    check_keys(*d, "detector", {"kind", "jitter", "external"});
    std::string kind = to_string(c.detector.kind);
    read(*d, "kind", kind);
    c.detector.kind = parse_detector_kind(kind);
    if (const auto j = d->find("jitter"); j != d->end()) {
      check_keys(*j, "detector.jitter", {"drop_rate", "shift_sigma", "seed", "score"});
      read(*j, "drop_rate", c.detector.jitter.drop_rate);
      read(*j, "shift_sigma", c.detector.jitter.shift_sigma);
      read(*j, "seed", c.detector.jitter.seed);
      if (const auto s = j->find("score"); s != j->end()) {
        check_keys(*s, "detector.jitter.score", {"distribution", "a", "b"});
        std::string dist = "uniform";
        read(*s, "distribution", dist);
        c.detector.jitter.score.kind = parse_score_kind(dist);
        read(*s, "a", c.detector.jitter.score.a);
        read(*s, "b", c.detector.jitter.score.b);
      }
    }
    if (const auto e = d->find("external"); e != d->end()) {
      check_keys(*e, "detector.external", {"command", "timeout_s", "workers"});
      read(*e, "command", c.detector.external.command);
      read(*e, "timeout_s", c.detector.external.timeout_s);
      read(*e, "workers", c.detector.external.workers);
    }
  }
  if (const auto e = doc.find("eval"); e != doc.end()) {
    check_keys(*e, "eval", {"iou_threshold", "thresholds", "methods", "default_method", "group_by"});
    read(*e, "iou_threshold", c.eval.iou_threshold);
    read(*e, "thresholds", c.eval.thresholds);
    if (const auto m = e->find("methods"); m != e->end()) {
      if (!m->is_object()) throw Error("config: eval.methods must be an object");
      c.eval.methods.clear();
      for (const auto& [name, method] : m->items()) {
        if (!method.is_string()) throw Error("config: eval.methods values must be strings");
        c.eval.methods[name] = parse_eval_method(method.get<std::string>());
      }
    }
    std::string def = to_string(c.eval.default_method);
    read(*e, "default_method", def);
    c.eval.default_method = parse_eval_method(def);
    std::string group = "category";
    read(*e, "group_by", group);
    if (group != "category" && group != "class") throw Error("config: eval.group_by must be category or class");
    c.eval.by_category = group == "category";
  }
  if (const auto f = doc.find("footprint"); f != doc.end()) {
    check_keys(*f, "footprint", {"height_m", "swath_width_m", "swath_length_m"});
    read(*f, "height_m", c.footprint.height_m);
    read(*f, "swath_width_m", c.footprint.swath_width_m);
    read(*f, "swath_length_m", c.footprint.swath_length_m);
  }
  read(doc, "taxonomy", c.taxonomy_path);
  read(doc, "workers", c.workers);
  read(doc, "chunk_frames", c.chunk_frames);
  std::string scratch;
  read(doc, "scratch_dir", scratch);
  c.scratch_dir = scratch;
  read(doc, "cell_size_m", c.cell_size_m);
  validate(c);
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  auto config = pipeline_config_from_json(doc);
  // Relative taxonomy paths are relative to the config file.
  if (!config.taxonomy_path.empty() && std::filesystem::path(config.taxonomy_path).is_relative()) {
    config.taxonomy_path = (path.parent_path() / config.taxonomy_path).string();
  }
  return config;
}

void validate(const PipelineConfig& c) {
  if (c.window.width < 1 || c.window.height < 1) throw Error("config: window dimensions must be positive");
  if (!(c.window.min_overlap >= 0.0 && c.window.min_overlap < 1.0)) {
    throw Error("config: min_overlap must lie in [0, 1)");
  }
  validate(c.merge);
  validate(c.detector);
  if (!(c.eval.iou_threshold > 0.0 && c.eval.iou_threshold <= 1.0)) {
    throw Error("config: iou_threshold must lie in (0, 1]");
  }
  for (std::size_t i = 1; i < c.eval.thresholds.size(); ++i) {
    if (!(c.eval.thresholds[i] > c.eval.thresholds[i - 1])) {
      throw Error("config: eval thresholds must be strictly increasing");
    }
  }
  if (c.workers < 1) throw Error("config: workers must be at least 1");
  if (c.chunk_frames < 1) throw Error("config: chunk_frames must be at least 1");
  if (!(c.cell_size_m > 0.0)) throw Error("config: cell_size_m must be positive");
  if (!(c.footprint.swath_width_m > 0.0 && c.footprint.swath_length_m > 0.0 && c.footprint.height_m > 0.0)) {
    throw Error("config: footprint lengths must be positive");
  }
}

Taxonomy load_configured_taxonomy(const PipelineConfig& config) {
  return config.taxonomy_path.empty() ? Taxonomy::default_taxonomy() : load_taxonomy_file(config.taxonomy_path);
}

FrameRecord detect_frame(const FrameRecord& frame, std::size_t frame_index, Detector& detector,
                         const Taxonomy& taxonomy, const PipelineConfig& config,
                         const std::filesystem::path& image_root) {
  try {
    const TilePlan plan = plan_tiles({frame.width, frame.height}, config.window);
    std::unique_ptr<ScratchDir> scratch;
    std::unique_ptr<TileImages> images;
    if (detector.needs_pixels()) {
      scratch = std::make_unique<ScratchDir>(config.scratch_dir);
      images = std::make_unique<TileImages>(resolve_image(image_root, frame.image_path), plan, scratch->path(),
                                            "frame" + std::to_string(frame_index));
    }
    std::atomic<std::int64_t> detector_ns{0};
    std::vector<std::vector<Detection>> per_tile(plan.tiles.size());
    for (const auto& tile : plan.tiles) {
      TileInput input{frame_index, &frame, &plan, tile.tile_id, images ? images->path(tile.tile_id) : std::string{}};
      per_tile[static_cast<std::size_t>(tile.tile_id)] = collect_tile(detector, input, taxonomy, detector_ns);
    }
    return finalize_frame(frame, per_tile, config.merge);
  } catch (const std::exception& e) {
    throw Error(frame_label(frame_index, frame) + ": " + e.what());
  }
}

PipelineResult run_pipeline(const SequenceManifest& manifest, const Taxonomy& taxonomy,
                            const PipelineConfig& config, Detector& detector,
                            const std::filesystem::path& image_root,
                            const std::function<void(const FrameRecord&)>& sink) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  PipelineResult result;
  result.detections.capture_rate = manifest.capture_rate;
  result.detections.frames.reserve(manifest.frames.size());

  // One plan per distinct frame size.
  std::map<std::pair<int, int>, TilePlan> plans;
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    const auto& f = manifest.frames[i];
    const auto key = std::make_pair(f.width, f.height);
    if (plans.contains(key)) continue;
    try {
      plans.emplace(key, plan_tiles({f.width, f.height}, config.window));
    } catch (const Error& e) {
      throw Error(frame_label(i, f) + ": " + e.what());
    }
  }

  std::unique_ptr<ScratchDir> scratch;
  if (detector.needs_pixels()) scratch = std::make_unique<ScratchDir>(config.scratch_dir);

  std::atomic<std::int64_t> detector_ns{0};
  const std::size_t chunk = static_cast<std::size_t>(config.chunk_frames);
  for (std::size_t begin = 0; begin < manifest.frames.size(); begin += chunk) {
    const std::size_t end = std::min(manifest.frames.size(), begin + chunk);
    const std::size_t count = end - begin;

    std::vector<const TilePlan*> frame_plans(count);
    std::vector<std::size_t> task_offset(count + 1, 0);
    for (std::size_t k = 0; k < count; ++k) {
      const auto& f = manifest.frames[begin + k];
      frame_plans[k] = &plans.at({f.width, f.height});
      task_offset[k + 1] = task_offset[k] + frame_plans[k]->tiles.size();
    }

    std::vector<std::unique_ptr<TileImages>> images(count);
    if (scratch) {
      parallel_for(count, config.workers, [&](std::size_t k) {
        const auto& f = manifest.frames[begin + k];
        try {
          images[k] = std::make_unique<TileImages>(resolve_image(image_root, f.image_path), *frame_plans[k],
                                                   scratch->path(), "frame" + std::to_string(begin + k));
        } catch (const std::exception& e) {
          throw Error(frame_label(begin + k, f) + ": " + e.what());
        }
      });
    }

    // Flatten (frame, tile) pairs so a single large frame still uses every worker.
    std::vector<std::vector<std::vector<Detection>>> per_tile(count);
    for (std::size_t k = 0; k < count; ++k) per_tile[k].resize(frame_plans[k]->tiles.size());
    parallel_for(task_offset[count], config.workers, [&](std::size_t task) {
      const auto k = static_cast<std::size_t>(
          std::upper_bound(task_offset.begin(), task_offset.end(), task) - task_offset.begin() - 1);
      const int tile_id = static_cast<int>(task - task_offset[k]);
      const auto& f = manifest.frames[begin + k];
      TileInput input{begin + k, &f, frame_plans[k], tile_id, images[k] ? images[k]->path(tile_id) : std::string{}};
      try {
        per_tile[k][static_cast<std::size_t>(tile_id)] = collect_tile(detector, input, taxonomy, detector_ns);
      } catch (const std::exception& e) {
        throw Error(frame_label(begin + k, f) + ": " + e.what());
      }
    });

    std::vector<FrameRecord> finished(count);
    parallel_for(count, config.workers, [&](std::size_t k) {
      finished[k] = finalize_frame(manifest.frames[begin + k], per_tile[k], config.merge);
    });
    for (auto& f : finished) {
      if (sink) sink(f);
      result.detections.frames.push_back(std::move(f));
    }
    result.timing.tiles += task_offset[count];
  }
  detector.finish();

  result.timing.frames = manifest.frames.size();
  result.timing.detector_seconds = static_cast<double>(detector_ns.load()) * 1e-9;
  const bool has_ground_truth = std::any_of(manifest.frames.begin(), manifest.frames.end(),
                                            [](const FrameRecord& f) { return !f.boxes.empty(); });
  if (has_ground_truth) result.report = evaluate(manifest, result.detections, taxonomy, config.eval);
  result.timing.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

PipelineResult run_pipeline_files(const PipelineFiles& files, const PipelineConfig& config) {
  const Taxonomy taxonomy = load_configured_taxonomy(config);
  const auto loaded = load_annotations_file(files.manifest, {&taxonomy, true});
  auto detector = make_detector(config.detector);

  auto partial = files.detections;
  partial += ".incomplete";
  std::ofstream out(partial, std::ios::trunc);
  if (!out) throw Error("cannot write " + partial.string());
  SequenceManifest header_only;
  header_only.capture_rate = loaded.manifest.capture_rate;
  save_annotations(header_only, out);

  auto result = run_pipeline(loaded.manifest, taxonomy, config, *detector, files.manifest.parent_path(),
                             [&](const FrameRecord& f) { out << frame_to_json(f) << '\n'; });
  out.close();
  if (!out) throw Error("write failed for " + partial.string());
  std::filesystem::rename(partial, files.detections);

  if (result.report) {
    if (!files.report.empty()) {
      std::ofstream r(files.report);
      if (!r) throw Error("cannot write " + files.report.string());
      r << report_to_json(*result.report) << '\n';
    }
    if (!files.csv.empty()) {
      std::ofstream c(files.csv);
      if (!c) throw Error("cannot write " + files.csv.string());
      c << report_to_csv(*result.report);
    }
  }
  return result;
}

}  // namespace litter
