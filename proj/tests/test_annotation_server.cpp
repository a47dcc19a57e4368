#include <doctest.h>

#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "litter/annotation_server.hpp"
#include "litter/error.hpp"
#include "support.hpp"

using namespace litter;
using namespace testing_support;
using nlohmann::json;

namespace {

struct Running {
  AnnotationStore store;
  AnnotationServer server;
  int port = 0;
  std::thread thread;

  Running(const std::filesystem::path& manifest, const std::filesystem::path& assets = {})
      : store(manifest, Taxonomy::default_taxonomy()), server(store, assets) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.run(); });
    server.wait_until_ready();
  }
  ~Running() {
    server.stop();
    thread.join();
  }
};

SequenceManifest sample(std::size_t frames) {
  SequenceManifest m;
  for (std::size_t i = 0; i < frames; ++i) {
    m.frames.push_back({"img" + std::to_string(i) + ".png", 640, 480, {}, {}, {{2, {10, 20, 30, 40}, std::nullopt}}});
  }
  return m;
}

}  // namespace

TEST_CASE("annotation HTTP API") {
  TempDir dir("server");
  const auto path = dir / "m.jsonl";
  save_annotations_file(sample(62), path);
  { std::ofstream(dir / "img0.png", std::ios::binary) << std::string("\x89PNG fake bytes", 15); }

  Running srv(path);
  httplib::Client cli("127.0.0.1", srv.port);

  SUBCASE("manifest lists frames and taxonomy") {
    const auto res = cli.Get("/api/manifest");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto doc = json::parse(res->body);
    CHECK(doc["frames"].size() == 62);
    CHECK(doc["frames"][0]["version"] == 0);
    CHECK(doc["taxonomy"].size() == 25);
  }

  SUBCASE("frame read-back") {
    const auto res = cli.Get("/api/frames/0");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto doc = json::parse(res->body);
    CHECK(doc["version"] == 0);
    CHECK(doc["frame"]["image_path"] == "img0.png");
    CHECK(doc["frame"]["boxes"][0]["x"] == 10);
    CHECK(cli.Get("/api/frames/62")->status == 404);
  }

  SUBCASE("put then get returns identical boxes and persists to disk") {
    const json body = {{"version", 0},
                       {"boxes", json::array({{{"class_id", 3}, {"x", 1}, {"y", 2}, {"w", 3}, {"h", 4}},
                                              {{"class_id", 6}, {"x", 100}, {"y", 200}, {"w", 50}, {"h", 40}}})}};
    auto res = cli.Put("/api/frames/0/boxes", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["version"] == 1);
    res = cli.Get("/api/frames/0");
    const auto doc = json::parse(res->body);
    CHECK(doc["version"] == 1);
    CHECK(doc["frame"]["boxes"] == body["boxes"]);
    const auto on_disk = load_annotations_file(path).manifest;
    REQUIRE(on_disk.frames[0].boxes.size() == 2);
    CHECK(on_disk.frames[0].boxes[1].box == BoundingBox{100, 200, 50, 40});

    SUBCASE("stale version is rejected without data loss") {
      const json stale = {{"version", 0}, {"boxes", json::array()}};
      auto r = cli.Put("/api/frames/0/boxes", stale.dump(), "application/json");
      REQUIRE(r);
      CHECK(r->status == 409);
      CHECK(json::parse(r->body)["current_version"] == 1);
      CHECK(json::parse(cli.Get("/api/frames/0")->body)["frame"]["boxes"] == body["boxes"]);
      CHECK(load_annotations_file(path).manifest.frames[0].boxes.size() == 2);
    }
  }

  SUBCASE("empty box list is stored") {
    const json body = {{"version", 0}, {"boxes", json::array()}};
    CHECK(cli.Put("/api/frames/5/boxes", body.dump(), "application/json")->status == 200);
    CHECK(load_annotations_file(path).manifest.frames[5].boxes.empty());
  }

  SUBCASE("invalid payloads") {
    CHECK(cli.Put("/api/frames/0/boxes", "{", "application/json")->status == 400);
    CHECK(cli.Put("/api/frames/0/boxes", R"({"boxes": []})", "application/json")->status == 400);
    const json oob = {{"version", 0},
                      {"boxes", json::array({{{"class_id", 2}, {"x", 630}, {"y", 0}, {"w", 20}, {"h", 5}}})}};
    CHECK(cli.Put("/api/frames/0/boxes", oob.dump(), "application/json")->status == 400);
    const json unknown = {{"version", 0},
                          {"boxes", json::array({{{"class_id", 99}, {"x", 0}, {"y", 0}, {"w", 2}, {"h", 2}}})}};
    CHECK(cli.Put("/api/frames/0/boxes", unknown.dump(), "application/json")->status == 400);
    CHECK(cli.Put("/api/frames/99/boxes", json{{"version", 0}, {"boxes", json::array()}}.dump(), "application/json")
              ->status == 404);
    CHECK(json::parse(cli.Get("/api/frames/0")->body)["version"] == 0);
  }

  SUBCASE("image bytes") {
    const auto res = cli.Get("/api/images/0");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == std::string("\x89PNG fake bytes", 15));
    CHECK(res->get_header_value("Content-Type") == "image/png");
    CHECK(cli.Get("/api/images/1")->status == 404);
  }

  SUBCASE("index page") {
    const auto res = cli.Get("/");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body.find("/api/manifest") != std::string::npos);
  }
}

TEST_CASE("concurrent writers: exactly one wins each version") {
  TempDir dir("server-race");
  const auto path = dir / "m.jsonl";
  save_annotations_file(sample(1), path);
  Running srv(path);
  std::atomic<int> ok{0};
  std::atomic<int> conflict{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client cli("127.0.0.1", srv.port);
      const json body = {{"version", 0},
                         {"boxes", json::array({{{"class_id", 2}, {"x", t}, {"y", 0}, {"w", 5}, {"h", 5}}})}};
      const auto r = cli.Put("/api/frames/0/boxes", body.dump(), "application/json");
      if (r && r->status == 200) ++ok;
      if (r && r->status == 409) ++conflict;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 1);
  CHECK(conflict == 7);
}

TEST_CASE("static assets are served when configured") {
  TempDir dir("server-assets");
  save_annotations_file(sample(1), dir / "m.jsonl");
  std::filesystem::create_directories(dir / "web");
  { std::ofstream(dir / "web" / "index.html") << "<html>client</html>"; }
  Running srv(dir / "m.jsonl", dir / "web");
  httplib::Client cli("127.0.0.1", srv.port);
  const auto res = cli.Get("/");
  REQUIRE(res);
  CHECK(res->body == "<html>client</html>");
}

TEST_CASE("bind address parsing") {
  CHECK(parse_bind_address("0.0.0.0:8080") == std::pair<std::string, int>{"0.0.0.0", 8080});
  CHECK(parse_bind_address(":9000") == std::pair<std::string, int>{"127.0.0.1", 9000});
  CHECK_THROWS_AS(parse_bind_address("localhost"), Error);
  CHECK_THROWS_AS(parse_bind_address("h:70000"), Error);
  CHECK_THROWS_AS(parse_bind_address("h:abc"), Error);
}
