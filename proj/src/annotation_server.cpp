#include "litter/annotation_server.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "litter/error.hpp"

namespace litter {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

AnnotationStore::AnnotationStore(std::filesystem::path manifest_path, Taxonomy taxonomy)
    : path_(std::move(manifest_path)), taxonomy_(std::move(taxonomy)) {
  manifest_ = load_annotations_file(path_, {&taxonomy_, true}).manifest;
  versions_.assign(manifest_.frames.size(), 0);
}

std::size_t AnnotationStore::frame_count() const {
  std::shared_lock lock(mutex_);
  return manifest_.frames.size();
}

std::optional<AnnotationStore::FrameView> AnnotationStore::frame(std::size_t index) const {
  std::shared_lock lock(mutex_);
  if (index >= manifest_.frames.size()) return std::nullopt;
  return FrameView{manifest_.frames[index], versions_[index]};
}

AnnotationStore::PutResult AnnotationStore::put_boxes(std::size_t index, std::vector<BoxRecord> boxes,
                                                      std::uint64_t expected_version) {
  std::unique_lock lock(mutex_);
  if (index >= manifest_.frames.size()) return {PutStatus::not_found, 0, "no frame " + std::to_string(index)};
  if (versions_[index] != expected_version) {
    return {PutStatus::conflict, versions_[index],
            "frame " + std::to_string(index) + " is at version " + std::to_string(versions_[index])};
  }
  const auto& frame = manifest_.frames[index];
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (auto err = validate_box(boxes[i], frame.width, frame.height, &taxonomy_); !err.empty()) {
      return {PutStatus::invalid, versions_[index], "box " + std::to_string(i) + ": " + err};
    }
  }
  // Persist first so a failed write leaves the served state unchanged.
  SequenceManifest next = manifest_;
  next.frames[index].boxes = std::move(boxes);
  save_annotations_file(next, path_);
  manifest_ = std::move(next);
  return {PutStatus::ok, ++versions_[index], {}};
}

std::optional<std::filesystem::path> AnnotationStore::image_file(std::size_t index) const {
  std::shared_lock lock(mutex_);
  if (index >= manifest_.frames.size()) return std::nullopt;
  const std::filesystem::path p(manifest_.frames[index].image_path);
  return p.is_absolute() ? p : path_.parent_path() / p;
}

std::string AnnotationStore::manifest_json() const {
  std::shared_lock lock(mutex_);
  ordered_json doc;
  doc["capture_rate"] = manifest_.capture_rate;
  auto frames = ordered_json::array();
  for (std::size_t i = 0; i < manifest_.frames.size(); ++i) {
    const auto& f = manifest_.frames[i];
    frames.push_back({{"index", i},
                      {"image_path", f.image_path},
                      {"width", f.width},
                      {"height", f.height},
                      {"box_count", f.boxes.size()},
                      {"version", versions_[i]}});
  }
  doc["frames"] = std::move(frames);
  doc["taxonomy"] = ordered_json::parse(taxonomy_to_json(taxonomy_));
  return doc.dump();
}

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

std::optional<std::size_t> parse_index(const std::string& text) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(text, &pos);
    if (pos != text.size()) return std::nullopt;
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

constexpr const char* kFallbackIndex =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>Litter annotation</title></head>"
    "<body><h1>Litter annotation service</h1><p>No client assets configured. API:</p><ul>"
    "<li>GET /api/manifest</li><li>GET /api/frames/{i}</li><li>PUT /api/frames/{i}/boxes</li>"
    "<li>GET /api/images/{i}</li></ul></body></html>";

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, std::filesystem::path assets_dir)
    : store_(store), assets_dir_(std::move(assets_dir)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::install_routes() {
  auto& srv = *server_;

  srv.Get("/api/manifest", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(store_.manifest_json(), "application/json");
  });

  srv.Get(R"(/api/frames/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto index = parse_index(req.matches[1]);
    const auto view = index ? store_.frame(*index) : std::nullopt;
    if (!view) return send_error(res, 404, "no such frame");
    ordered_json doc;
    doc["frame"] = ordered_json::parse(frame_to_json(view->frame));
    doc["version"] = view->version;
    res.set_content(doc.dump(), "application/json");
  });

  srv.Put(R"(/api/frames/(\d+)/boxes)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto index = parse_index(req.matches[1]);
    if (!index) return send_error(res, 404, "no such frame");
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send_error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("version") || !body["version"].is_number_unsigned() ||
        !body.contains("boxes") || !body["boxes"].is_array()) {
      return send_error(res, 400, "body must be {\"boxes\": [...], \"version\": n}");
    }
    // Reuse the frame parser for box field validation.
    const auto view = store_.frame(*index);
    if (!view) return send_error(res, 404, "no such frame");
    std::vector<BoxRecord> boxes;
    try {
      json probe = {{"image_path", ""}, {"width", view->frame.width}, {"height", view->frame.height},
                    {"boxes", body["boxes"]}};
      boxes = frame_from_json(probe.dump(), *index).boxes;
    } catch (const FormatError& e) {
      return send_error(res, 400, e.what());
    }
    AnnotationStore::PutResult result;
    try {
      result = store_.put_boxes(*index, std::move(boxes), body["version"].get<std::uint64_t>());
    } catch (const std::exception& e) {
      return send_error(res, 500, e.what());
    }
    switch (result.status) {
      case AnnotationStore::PutStatus::ok:
        res.set_content(json{{"version", result.version}}.dump(), "application/json");
        return;
      case AnnotationStore::PutStatus::conflict:
        res.status = 409;
        res.set_content(json{{"error", "version conflict"}, {"message", result.message},
                             {"current_version", result.version}}
                            .dump(),
                        "application/json");
        return;
      case AnnotationStore::PutStatus::invalid:
        return send_error(res, 400, result.message);
      case AnnotationStore::PutStatus::not_found:
        return send_error(res, 404, result.message);
    }
  });

  srv.Get(R"(/api/images/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto index = parse_index(req.matches[1]);
    const auto path = index ? store_.image_file(*index) : std::nullopt;
    if (!path) return send_error(res, 404, "no such frame");
    std::ifstream in(*path, std::ios::binary);
    if (!in) return send_error(res, 404, "image not found: " + path->string());
    std::ostringstream bytes;
    bytes << in.rdbuf();
    res.set_content(bytes.str(), content_type_for(*path));
  });

  if (!assets_dir_.empty() && std::filesystem::is_directory(assets_dir_)) {
    srv.set_mount_point("/", assets_dir_.string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackIndex, "text/html; charset=utf-8");
    });
  }
}

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::run() { server_->listen_after_bind(); }

void AnnotationServer::stop() {
  if (server_) server_->stop();
}

void AnnotationServer::wait_until_ready() const { server_->wait_until_ready(); }

std::pair<std::string, int> parse_bind_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error("bind address must look like host:port");
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  const auto port = parse_index(address.substr(colon + 1));
  if (!port || *port > 65535) throw Error("invalid port in bind address \"" + address + "\"");
  return {host, static_cast<int>(*port)};
}

}  // namespace litter
