// litter: command-line front end for the street-litter toolkit.
//
// Every stage reads and writes files, so stages compose:
//   litter decimate raw.jsonl --target-rate 0.4 -o annotated.jsonl
//   litter detect annotated.jsonl -o detections.jsonl --report report.json
//   litter eval --gt annotated.jsonl --detections detections.jsonl
//   litter density detections.jsonl -o density.geojson

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "litter/annotation_server.hpp"
#include "litter/dataset.hpp"
#include "litter/error.hpp"
#include "litter/eval.hpp"
#include "litter/geomap.hpp"
#include "litter/pipeline.hpp"
#include "litter/taxonomy.hpp"
#include "litter/tiling.hpp"

namespace {

using namespace litter;

std::pair<int, int> parse_wxh(const std::string& text) {
  int w = 0;
  int h = 0;
  char sep = 0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%d%c%d%c", &w, &sep, &h, &extra) != 3 || (sep != 'x' && sep != 'X') || w < 1 ||
      h < 1) {
    throw Error("expected WxH, got \"" + text + "\"");
  }
  return {w, h};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

/// Flags shared by the pipeline-facing subcommands. Unset flags leave the
/// config file (or defaults) untouched.
struct CommonFlags {
  std::string config;
  std::optional<int> workers;
  std::optional<std::string> window;
  std::optional<double> min_overlap;
  std::optional<double> merge_threshold;
  std::optional<std::string> merge_measure;
  std::optional<double> iou_threshold;
  std::optional<std::string> detector;
  std::optional<std::uint64_t> seed;
  std::optional<double> cell_size_m;
  std::optional<std::string> taxonomy;

  PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : load_pipeline_config(config);
    if (workers) c.workers = *workers;
    if (window) std::tie(c.window.width, c.window.height) = parse_wxh(*window);
    if (min_overlap) c.window.min_overlap = *min_overlap;
    if (merge_threshold) c.merge.overlap_threshold = *merge_threshold;
    if (merge_measure) c.merge.overlap_measure = parse_overlap_measure(*merge_measure);
    if (iou_threshold) c.eval.iou_threshold = *iou_threshold;
    if (detector) c.detector.kind = parse_detector_kind(*detector);
    if (seed) c.detector.jitter.seed = *seed;
    if (cell_size_m) c.cell_size_m = *cell_size_m;
    if (taxonomy) c.taxonomy_path = *taxonomy;
    validate(c);
    return c;
  }
};

void add_config_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--taxonomy", f.taxonomy, "Taxonomy document (JSON); default is the built-in table");
}

void add_pipeline_flags(CLI::App* app, CommonFlags& f) {
  add_config_flag(app, f);
  app->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--window", f.window, "Sliding window size, WxH");
  app->add_option("--min-overlap", f.min_overlap, "Minimum overlap between neighbouring tiles, [0,1)");
  app->add_option("--merge-threshold", f.merge_threshold, "Overlap above which same-class detections merge");
  app->add_option("--merge-measure", f.merge_measure, "Merge overlap measure: iou or over_smaller");
  app->add_option("--iou-threshold", f.iou_threshold, "IoU needed for a correct detection");
  app->add_option("--detector", f.detector, "replay, jitter or external");
  app->add_option("--seed", f.seed, "Jitter detector seed");
}

std::sig_atomic_t volatile g_stop = 0;
AnnotationServer* g_server = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Street-litter detection toolkit: tiling, detection fusion, evaluation and density maps"};
  app.require_subcommand(1);

  // tile-plan
  auto* tile_cmd = app.add_subcommand("tile-plan", "Print the sliding-window plan for a frame size");
  CommonFlags tile_flags;
  std::string tile_frame = "1920x1480";
  std::string tile_out;
  add_config_flag(tile_cmd, tile_flags);
  tile_cmd->add_option("--frame", tile_frame, "Frame size, WxH")->capture_default_str();
  tile_cmd->add_option("--window", tile_flags.window, "Sliding window size, WxH");
  tile_cmd->add_option("--min-overlap", tile_flags.min_overlap, "Minimum tile overlap, [0,1)");
  tile_cmd->add_option("-o,--out", tile_out, "Output file (default stdout)");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Run tile -> detect -> merge over a manifest");
  CommonFlags detect_flags;
  PipelineFiles files;
  std::string external_command;
  add_pipeline_flags(detect_cmd, detect_flags);
  detect_cmd->add_option("manifest", files.manifest, "Annotation manifest (JSON Lines)")
      ->required()
      ->check(CLI::ExistingFile);
  detect_cmd->add_option("-o,--out", files.detections, "Detections file (JSON Lines)")->required();
  detect_cmd->add_option("--report", files.report, "Evaluation report (JSON), written when ground truth exists");
  detect_cmd->add_option("--csv", files.csv, "PR points as CSV");
  detect_cmd->add_option("--external-command", external_command, "Command for the external detector");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score detections against ground truth");
  CommonFlags eval_flags;
  std::string gt_path;
  std::string det_path;
  std::string report_path;
  std::string csv_path;
  std::vector<std::string> method_overrides;
  std::string group_by = "category";
  add_config_flag(eval_cmd, eval_flags);
  eval_cmd->add_option("--gt", gt_path, "Ground-truth manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--detections", det_path, "Detections file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--iou-threshold", eval_flags.iou_threshold, "IoU needed for a correct detection");
  eval_cmd->add_option("--method", method_overrides, "Per-group method, NAME=box|pixel (repeatable)");
  eval_cmd->add_option("--group-by", group_by, "category or class")
      ->check(CLI::IsMember({"category", "class"}))
      ->capture_default_str();
  eval_cmd->add_option("--report", report_path, "Report file (default stdout)");
  eval_cmd->add_option("--csv", csv_path, "PR points as CSV");

  // density
  auto* density_cmd = app.add_subcommand("density", "Aggregate geo-referenced detections into a GeoJSON grid");
  CommonFlags density_flags;
  std::string density_in;
  std::string density_out;
  std::optional<double> origin_lat;
  std::optional<double> origin_lon;
  std::optional<double> swath_width;
  std::optional<double> swath_length;
  add_config_flag(density_cmd, density_flags);
  density_cmd->add_option("detections", density_in, "Detections or annotation file with poses")
      ->required()
      ->check(CLI::ExistingFile);
  density_cmd->add_option("-o,--out", density_out, "GeoJSON output (default stdout)");
  density_cmd->add_option("--cell-size-m", density_flags.cell_size_m, "Grid cell size in metres");
  density_cmd->add_option("--origin-lat", origin_lat, "Grid origin latitude (default: first posed frame)");
  density_cmd->add_option("--origin-lon", origin_lon, "Grid origin longitude (default: first posed frame)");
  density_cmd->add_option("--swath-width-m", swath_width, "Across-track ground width of a frame");
  density_cmd->add_option("--swath-length-m", swath_length, "Along-track ground length of a frame");

  // decimate
  auto* decimate_cmd = app.add_subcommand("decimate", "Keep every k-th frame to reach a lower frame rate");
  std::string decimate_in;
  std::string decimate_out;
  double target_rate = 0.4;
  decimate_cmd->add_option("manifest", decimate_in, "Input manifest")->required()->check(CLI::ExistingFile);
  decimate_cmd->add_option("--target-rate", target_rate, "Target frames per second")->capture_default_str();
  decimate_cmd->add_option("-o,--out", decimate_out, "Output manifest")->required();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Per-class and per-category box counts");
  CommonFlags stats_flags;
  std::string stats_in;
  std::string stats_out;
  add_config_flag(stats_cmd, stats_flags);
  stats_cmd->add_option("manifest", stats_in, "Manifest")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("-o,--out", stats_out, "Output file (default stdout)");

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "Serve the annotation HTTP API for a manifest");
  CommonFlags annotate_flags;
  std::string annotate_manifest;
  std::string bind_address = "127.0.0.1:8080";
  std::string assets_dir;
  add_config_flag(annotate_cmd, annotate_flags);
  annotate_cmd->add_option("manifest", annotate_manifest, "Manifest to edit in place")
      ->required()
      ->check(CLI::ExistingFile);
  annotate_cmd->add_option("--bind", bind_address, "Listen address, host:port")->capture_default_str();
  annotate_cmd->add_option("--assets", assets_dir, "Directory with the browser client");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tile_cmd->parsed()) {
      auto config = tile_flags.resolve();
      const auto [w, h] = parse_wxh(tile_frame);
      write_text(tile_out, tile_plan_to_json(plan_tiles({w, h}, config.window)));
    } else if (detect_cmd->parsed()) {
      auto config = detect_flags.resolve();
      if (!external_command.empty()) config.detector.external.command = external_command;
      validate(config);
      const auto result = run_pipeline_files(files, config);
      const auto& t = result.timing;
      std::fprintf(stderr, "processed %zu frames (%zu tiles) in %.3f s: %.2f frames/s, detector %.3f s\n", t.frames,
                   t.tiles, t.total_seconds, t.frames_per_second(), t.detector_seconds);
      if (result.report && files.report.empty()) std::cout << report_to_json(*result.report) << '\n';
    } else if (eval_cmd->parsed()) {
      auto config = eval_flags.resolve();
      for (const auto& m : method_overrides) {
        const auto eq = m.rfind('=');
        if (eq == std::string::npos) throw Error("--method expects NAME=box|pixel");
        config.eval.methods[m.substr(0, eq)] = parse_eval_method(m.substr(eq + 1));
      }
      config.eval.by_category = group_by == "category";
      const Taxonomy taxonomy = load_configured_taxonomy(config);
      const auto gt = load_annotations_file(gt_path, {&taxonomy, true}).manifest;
      const auto det = load_annotations_file(det_path, {&taxonomy, true}).manifest;
      const auto report = evaluate(gt, det, taxonomy, config.eval);
      write_text(report_path, report_to_json(report));
      if (!csv_path.empty()) write_text(csv_path, report_to_csv(report));
    } else if (density_cmd->parsed()) {
      auto config = density_flags.resolve();
      if (swath_width) config.footprint.swath_width_m = *swath_width;
      if (swath_length) config.footprint.swath_length_m = *swath_length;
      const Taxonomy taxonomy = load_configured_taxonomy(config);
      const auto manifest = load_annotations_file(density_in, {&taxonomy, true}).manifest;
      const auto geo = georeference(manifest, taxonomy, config.footprint);
      DensityGridConfig grid{0.0, 0.0, config.cell_size_m};
      for (const auto& f : manifest.frames) {
        if (f.pose) {
          grid.origin_lat = f.pose->lat;
          grid.origin_lon = f.pose->lon;
          break;
        }
      }
      if (origin_lat) grid.origin_lat = *origin_lat;
      if (origin_lon) grid.origin_lon = *origin_lon;
      const auto density = accumulate_density(geo.detections, grid);
      if (geo.frames_without_pose > 0) {
        std::fprintf(stderr, "skipped %zu frames without pose\n", geo.frames_without_pose);
      }
      write_text(density_out, export_geojson(density, 2));
    } else if (decimate_cmd->parsed()) {
      const auto loaded = load_annotations_file(decimate_in);
      const auto out = decimate(loaded.manifest, target_rate);
      save_annotations_file(out, decimate_out);
      std::fprintf(stderr, "kept %zu of %zu frames (%.4g fps)\n", out.frames.size(), loaded.manifest.frames.size(),
                   out.capture_rate);
    } else if (stats_cmd->parsed()) {
      const auto config = stats_flags.resolve();
      const Taxonomy taxonomy = load_configured_taxonomy(config);
      const auto manifest = load_annotations_file(stats_in, {&taxonomy, true}).manifest;
      write_text(stats_out, stats_to_json(dataset_stats(manifest, taxonomy)));
    } else if (annotate_cmd->parsed()) {
      const auto config = annotate_flags.resolve();
      AnnotationStore store(annotate_manifest, load_configured_taxonomy(config));
      AnnotationServer server(store, assets_dir);
      const auto [host, port] = parse_bind_address(bind_address);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "serving %zu frames on http://%s:%d/\n", store.frame_count(), host.c_str(), bound);
      server.run();
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
