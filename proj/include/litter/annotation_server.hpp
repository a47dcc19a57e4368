#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "litter/dataset.hpp"
#include "litter/taxonomy.hpp"

namespace httplib {
class Server;
}

namespace litter {

/// File-backed annotation state with optimistic per-frame versions.
/// Reads may run concurrently; writes are serialized and persisted before
/// they become visible.
class AnnotationStore {
 public:
  AnnotationStore(std::filesystem::path manifest_path, Taxonomy taxonomy);

  struct FrameView {
    FrameRecord frame;
    std::uint64_t version = 0;
  };

  enum class PutStatus { ok, conflict, invalid, not_found };
  struct PutResult {
    PutStatus status = PutStatus::ok;
    std::uint64_t version = 0;  // new version on success, current version on conflict
    std::string message;
  };

  std::size_t frame_count() const;
  std::optional<FrameView> frame(std::size_t index) const;
  PutResult put_boxes(std::size_t index, std::vector<BoxRecord> boxes, std::uint64_t expected_version);
  /// Image file of a frame, resolved against the manifest's directory.
  std::optional<std::filesystem::path> image_file(std::size_t index) const;
  /// Frame list and taxonomy as served by GET /api/manifest.
  std::string manifest_json() const;

  const Taxonomy& taxonomy() const noexcept { return taxonomy_; }

 private:
  std::filesystem::path path_;
  Taxonomy taxonomy_;
  mutable std::shared_mutex mutex_;
  SequenceManifest manifest_;
  std::vector<std::uint64_t> versions_;
};

/// HTTP front end for an AnnotationStore.
///   GET  /api/manifest              frame list + taxonomy
///   GET  /api/frames/{i}            {"frame": FrameRecord, "version": n}
///   PUT  /api/frames/{i}/boxes      {"boxes": [...], "version": n} -> {"version": n + 1}
///   GET  /api/images/{i}            image bytes
///   GET  /                          client assets
class AnnotationServer {
 public:
  /// `assets_dir` may be empty; a minimal index page is served then.
  AnnotationServer(AnnotationStore& store, std::filesystem::path assets_dir = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds `host:port`; port 0 picks a free port. Returns the bound port.
  /// Throws Error when binding fails.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a prior bind().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  AnnotationStore& store_;
  std::filesystem::path assets_dir_;
  std::unique_ptr<httplib::Server> server_;
};

/// Parses "host:port" (or ":port"). Throws Error on malformed input.
std::pair<std::string, int> parse_bind_address(const std::string& address);

}  // namespace litter
