#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <sys/types.h>
#include <vector>

#include "litter/detect.hpp"

namespace litter {

/// A child process driven over line-oriented stdin/stdout.
class Subprocess {
 public:
  using Clock = std::chrono::steady_clock;

  /// Starts `/bin/sh -c command`. Throws Error when the spawn fails.
  explicit Subprocess(const std::string& command);
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// Both throw Error on timeout, closed pipe or child exit.
  void write_line(const std::string& line, Clock::time_point deadline);
  std::string read_line(Clock::time_point deadline);

  /// Closes stdin and waits up to `grace` for exit, then kills.
  /// Returns the exit status, or -signal when terminated by a signal.
  int close_and_wait(std::chrono::milliseconds grace);
  void kill();

 private:
  std::string describe_exit();

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  bool reaped_ = false;
  int status_ = 0;
};

/// Request line for one tile.
std::string external_request(int tile_id, const std::string& image_path, int width, int height);
/// Parses a response line. Throws Error when it is malformed or answers a different tile.
std::vector<Detection> parse_external_response(const std::string& line, int expected_tile_id);

/// Tile detector backed by a pool of helper processes speaking the
/// line-delimited JSON protocol. Workers are spawned lazily.
class ExternalDetector final : public Detector {
 public:
  explicit ExternalDetector(ExternalDetectorConfig config);
  ~ExternalDetector() override;

  std::vector<Detection> detect_tile(const TileInput& input) override;
  bool needs_pixels() const noexcept override { return true; }
  void finish() override;

 private:
  std::unique_ptr<Subprocess> acquire(int tile_id);
  void release(std::unique_ptr<Subprocess> worker);

  ExternalDetectorConfig config_;
  std::mutex mutex_;
  std::condition_variable available_;
  std::vector<std::unique_ptr<Subprocess>> idle_;
  int live_ = 0;
};

}  // namespace litter
