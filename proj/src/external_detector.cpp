#include "litter/external_detector.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "litter/error.hpp"

extern char** environ;

namespace litter {

namespace {

int remaining_ms(Subprocess::Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Subprocess::Clock::now());
  return left.count() <= 0 ? 0 : static_cast<int>(std::min<std::int64_t>(left.count(), 1 << 30));
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

Subprocess::Subprocess(const std::string& command) {
  // stdin is a socket so writes to a dead child fail with EPIPE instead of SIGPIPE.
  int in_pair[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) throw Error(errno_text("socketpair"));
  int out_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    throw Error(errno_text("pipe"));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pair[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  // Own process group, so kill() also reaches anything the shell started.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
  posix_spawnattr_destroy(&attr);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pair[1]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pair[0]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw Error(std::string("cannot start detector: ") + std::strerror(rc));
  }
  in_fd_ = in_pair[0];
  out_fd_ = out_pipe[0];
}

Subprocess::~Subprocess() {
  if (pid_ > 0 && !reaped_) kill();
  if (in_fd_ >= 0) ::close(in_fd_);
  if (out_fd_ >= 0) ::close(out_fd_);
}

std::string Subprocess::describe_exit() {
  if (!reaped_) {
    // The child may still be tearing down; give it a moment to be reaped.
    for (int i = 0; i < 50 && !reaped_; ++i) {
      if (::waitpid(pid_, &status_, WNOHANG) == pid_) {
        reaped_ = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
  if (!reaped_) return "detector closed its output";
  if (WIFEXITED(status_)) return "detector exited with status " + std::to_string(WEXITSTATUS(status_));
  if (WIFSIGNALED(status_)) return "detector killed by signal " + std::to_string(WTERMSIG(status_));
  return "detector terminated";
}

void Subprocess::write_line(const std::string& line, Clock::time_point deadline) {
  std::string data = line;
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    pollfd pfd{in_fd_, POLLOUT, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(errno_text("poll"));
    }
    if (ready == 0) throw Error("detector timed out accepting a request");
    const ssize_t n = ::send(in_fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw Error(describe_exit());
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string Subprocess::read_line(Clock::time_point deadline) {
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    pollfd pfd{out_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(errno_text("poll"));
    }
    if (ready == 0) throw Error("detector timed out");
    char chunk[4096];
    const ssize_t n = ::read(out_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw Error(errno_text("read"));
    }
    if (n == 0) throw Error(describe_exit());
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int Subprocess::close_and_wait(std::chrono::milliseconds grace) {
  if (in_fd_ >= 0) {
    ::close(in_fd_);
    in_fd_ = -1;
  }
  const auto deadline = Clock::now() + grace;
  while (!reaped_) {
    if (::waitpid(pid_, &status_, WNOHANG) == pid_) {
      reaped_ = true;
      break;
    }
    if (Clock::now() >= deadline) {
      kill();
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (WIFEXITED(status_)) return WEXITSTATUS(status_);
  if (WIFSIGNALED(status_)) return -WTERMSIG(status_);
  return -1;
}

void Subprocess::kill() {
  if (pid_ <= 0 || reaped_) return;
  ::kill(-pid_, SIGKILL);
  if (::waitpid(pid_, &status_, 0) == pid_) reaped_ = true;
}

std::string external_request(int tile_id, const std::string& image_path, int width, int height) {
  nlohmann::ordered_json req;
  req["tile_id"] = tile_id;
  req["image_path"] = image_path;
  req["width"] = width;
  req["height"] = height;
  return req.dump();
}

std::vector<Detection> parse_external_response(const std::string& line, int expected_tile_id) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed response: ") + e.what());
  }
  if (!doc.is_object()) throw Error("malformed response: expected an object");
  const auto id = doc.find("tile_id");
  if (id == doc.end() || !id->is_number_integer()) throw Error("malformed response: missing tile_id");
  if (id->get<std::int64_t>() != expected_tile_id) {
    throw Error("response answers tile " + std::to_string(id->get<std::int64_t>()));
  }
  const auto dets = doc.find("detections");
  if (dets == doc.end() || !dets->is_array()) throw Error("malformed response: detections must be a list");

  std::vector<Detection> out;
  out.reserve(dets->size());
  for (const auto& d : *dets) {
    if (!d.is_object()) throw Error("malformed response: detection is not an object");
    auto integer = [&](const char* key) {
      const auto it = d.find(key);
      if (it == d.end() || !it->is_number_integer()) {
        throw Error(std::string("malformed response: detection field \"") + key + "\" must be an integer");
      }
      return static_cast<int>(it->get<std::int64_t>());
    };
    Detection det;
    det.box = {integer("x"), integer("y"), integer("w"), integer("h")};
    det.class_id = integer("class_id");
    const auto score = d.find("score");
    if (score == d.end() || !score->is_number()) throw Error("malformed response: detection score must be a number");
    det.score = score->get<double>();
    out.push_back(det);
  }
  return out;
}

ExternalDetector::ExternalDetector(ExternalDetectorConfig config) : config_(std::move(config)) {}

ExternalDetector::~ExternalDetector() {
  for (auto& w : idle_) w->close_and_wait(std::chrono::milliseconds(200));
}

std::unique_ptr<Subprocess> ExternalDetector::acquire(int tile_id) {
  std::unique_lock lock(mutex_);
  available_.wait(lock, [&] { return !idle_.empty() || live_ < config_.workers; });
  if (!idle_.empty()) {
    auto w = std::move(idle_.back());
    idle_.pop_back();
    return w;
  }
  ++live_;
  lock.unlock();
  try {
    return std::make_unique<Subprocess>(config_.command);
  } catch (const Error& e) {
    std::lock_guard relock(mutex_);
    --live_;
    available_.notify_one();
    throw DetectorError(tile_id, e.what());
  }
}

void ExternalDetector::release(std::unique_ptr<Subprocess> worker) {
  std::lock_guard lock(mutex_);
  if (worker) {
    idle_.push_back(std::move(worker));
  } else {
    --live_;
  }
  available_.notify_one();
}

std::vector<Detection> ExternalDetector::detect_tile(const TileInput& input) {
  const auto& window = input.plan->window;
  auto worker = acquire(input.tile_id);
  const auto deadline = Subprocess::Clock::now() + std::chrono::duration_cast<Subprocess::Clock::duration>(
                                                        std::chrono::duration<double>(config_.timeout_s));
  std::vector<Detection> detections;
  try {
    worker->write_line(external_request(input.tile_id, input.image_path, window.width, window.height), deadline);
    detections = parse_external_response(worker->read_line(deadline), input.tile_id);
  } catch (const Error& e) {
    // A worker in an unknown protocol state is never reused.
    worker->kill();
    worker.reset();
    release(nullptr);
    throw DetectorError(input.tile_id, e.what());
  }
  release(std::move(worker));

  const BoundingBox extent{0, 0, window.width, window.height};
  for (const auto& d : detections) {
    if (!d.box.valid() || !extent.contains(d.box)) {
      throw DetectorError(input.tile_id, "detection (" + std::to_string(d.box.x) + "," + std::to_string(d.box.y) + "," +
                                             std::to_string(d.box.w) + "," + std::to_string(d.box.h) +
                                             ") outside the tile window");
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw DetectorError(input.tile_id, "detection score outside [0, 1]");
  }
  return detections;
}

void ExternalDetector::finish() {
  std::vector<std::unique_ptr<Subprocess>> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(idle_);
    live_ -= static_cast<int>(workers.size());
  }
  std::string failure;
  for (auto& w : workers) {
    const int status = w->close_and_wait(std::chrono::milliseconds(static_cast<int>(config_.timeout_s * 1000)));
    if (status != 0 && failure.empty()) failure = "detector exited with status " + std::to_string(status);
  }
  if (!failure.empty()) throw Error(failure);
}

}  // namespace litter
