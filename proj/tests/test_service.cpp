// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

// Render request parsing, the service handlers and the HTTP surface.

#include <doctest.h>

#include <filesystem>
#include <thread>

#include "fixtures.hpp"
#include "stylenerf/checkpoint.hpp"
#include "stylenerf/error.hpp"
#include "stylenerf/service.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace stylenerf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A trained (4 steps) run directory with checkpoint, registry and stylized frames.
struct ServiceFixture {
  fixtures::StylizedScene scene{"service"};
  fs::path run_dir = scene.dir;

  ServiceFixture() {
    save_checkpoint(train_multistyle(scene.data, scene.stage2, fixtures::tiny_multistyle(4, true)),
                    run_dir / "checkpoints" / "multistyle.snck");
  }
};

ServiceFixture& fixture() {
  static ServiceFixture f;
  return f;
}

std::unique_ptr<RenderService> open_service() { return RenderService::open(fixture().run_dir); }

json request(const json& style, int resolution = 64) {
  return {{"pose", {{"index", 1}}}, {"style", style}, {"resolution", resolution}};
}

// Every file under `dir` with its size and modification time.
std::map<std::string, std::pair<std::uintmax_t, fs::file_time_type>> snapshot(const fs::path& dir) {
  std::map<std::string, std::pair<std::uintmax_t, fs::file_time_type>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().string()] = {e.file_size(), e.last_write_time()};
  return out;
}

std::string error_of(const json& body) {
  try {
    parse_render_request(body);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("request parsing accepts every documented form") {
  const RenderRequest a = parse_render_request(request({{"id", "style_00"}}));
  CHECK(std::get<PoseIndex>(a.pose).index == 1);
  CHECK(std::get<StyleSingle>(a.style).id == "style_00");
  CHECK(a.resolution == 64);
  const RenderRequest b = parse_render_request(
      {{"pose", {{"orbit", {{"azimuth", 30}, {"elevation", 20}, {"radius", 4}}}}},
       {"style", {{"a", "style_00"}, {"b", "style_01"}, {"lambda", 0.25}}},
       {"resolution", 128},
       {"seed", 7}});
  CHECK(std::get<PoseOrbit>(b.pose).azimuth == 30.0);
  CHECK(std::get<StyleBlend>(b.style).lambda == 0.25);
  CHECK(b.seed == 7);
  const RenderRequest c = parse_render_request(
      {{"pose", {{"matrix", json::array({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 4}, {0, 0, 0, 1}})}}},
       {"style", {{"id", "content"}, {"intensity", 0.5}}}});
  CHECK(std::get<PoseMatrix>(c.pose).camera_to_world(2, 3) == 4.0);
  CHECK(std::get<StyleIntensity>(c.style).intensity == 0.5);
}

TEST_CASE("request parsing names the offending field") {
  CHECK(error_of(request({{"id", "style_00"}}, 100)).find("resolution") != std::string::npos);
  CHECK(error_of(request({{"a", "x"}, {"b", "y"}, {"lambda", 1.5}})).find("lambda") != std::string::npos);
  CHECK(error_of(request({{"id", "x"}, {"intensity", -0.1}})).find("intensity") != std::string::npos);
  CHECK(error_of({{"style", {{"id", "x"}}}}).find("pose") != std::string::npos);
  CHECK(error_of({{"pose", {{"index", 0}}}}).find("style") != std::string::npos);
  CHECK(!error_of({{"pose", {{"index", 0}, {"orbit", json::object()}}}, {"style", {{"id", "x"}}}}).empty());
  CHECK(!error_of({{"pose", {{"index", 0}}}, {"style", {{"id", "x"}}}, {"extra", 1}}).empty());
  CHECK(!error_of(json::array()).empty());
  CHECK(!error_of({{"pose", {{"matrix", json::array({1, 2})}}}, {"style", {{"id", "x"}}}}).empty());
}

TEST_CASE("style resolution") {
  const ServiceFixture& f = fixture();
  const StyleRegistry& r = f.scene.data.registry;
  CHECK(resolve_style(StyleSingle{"style_01"}, r).flatten() == r.at("style_01").statistics.flatten());
  CHECK(resolve_style(StyleBlend{"style_00", "style_01", 1.0}, r).flatten() == r.at("style_01").statistics.flatten());
  CHECK(resolve_style(StyleIntensity{"style_00", 0.0}, r).flatten() == r.at("content").statistics.flatten());
  CHECK_THROWS_AS(resolve_style(StyleSingle{"nope"}, r), UnknownStyleError);
  CHECK_THROWS_AS(resolve_style(StyleBlend{"style_00", "nope", 0.5}, r), UnknownStyleError);
}

TEST_CASE("missing checkpoint gives a clear state error") {
  const fs::path empty = fs::temp_directory_path() / "stylenerf_test_service_empty";
  fs::create_directories(empty);
  try {
    RenderService::open(empty);
    FAIL("expected StateError");
  } catch (const StateError& e) {
    CHECK(std::string(e.what()).find("train-multistyle") != std::string::npos);
  }
}

TEST_CASE("handlers: styles, thumbnails and health") {
  auto svc = open_service();
  const json styles = json::parse(svc->styles().body);
  REQUIRE(styles.size() == 3);
  CHECK(styles[0]["style_id"] == "style_00");
  CHECK(styles[2]["kind"] == "content");
  const HttpReply thumb = svc->thumbnail("style_01");
  CHECK(thumb.status == 200);
  CHECK(thumb.content_type == "image/png");
  const Image t = decode_png({thumb.body.begin(), thumb.body.end()});
  CHECK(t.width == 64);
  CHECK(t.height == 64);
  CHECK(svc->thumbnail("nope").status == 404);
  const json health = json::parse(svc->healthz().body);
  CHECK(health["status"] == "ok");
  CHECK(health["steps_done"] == 4);
  CHECK(health["digests"]["registry"] == fixture().scene.data.registry.digest());
  CHECK(health["digests"]["trunk"].get<std::string>().size() == 64);
  CHECK(health["digests"]["checkpoint"].get<std::string>().size() == 64);
}

TEST_CASE("render replies: success, determinism and errors") {
  auto svc = open_service();
  const auto before = snapshot(fixture().run_dir);
  const HttpReply a = svc->render(request({{"id", "style_00"}}).dump());
  REQUIRE(a.status == 200);
  CHECK(a.content_type == "image/png");
  CHECK(a.headers.count("X-Render-Time-Ms") == 1);
  const Image img = decode_png({a.body.begin(), a.body.end()});
  CHECK(img.width == 64);
  CHECK(img.height == 64);
  CHECK(svc->render(request({{"id", "style_00"}}).dump()).body == a.body);
  CHECK(svc->render(request({{"a", "style_00"}, {"b", "style_00"}, {"lambda", 0.5}}).dump()).body == a.body);
  CHECK(svc->render(request({{"id", "style_01"}}).dump()).body != a.body);

  CHECK(svc->render("{not json").status == 400);
  CHECK(svc->render(request({{"id", "style_00"}}, 100).dump()).status == 400);
  CHECK(svc->render(request({{"id", "missing"}}).dump()).status == 422);
  json far_pose = request({{"id", "style_00"}});
  far_pose["pose"] = {{"index", 99}};
  CHECK(svc->render(far_pose.dump()).status == 400);
  CHECK(snapshot(fixture().run_dir) == before);
}

TEST_CASE("render budget turns excess requests away") {
  auto svc = open_service();
  auto s1 = svc->try_acquire();
  auto s2 = svc->try_acquire();
  REQUIRE(s1.has_value());
  REQUIRE(s2.has_value());
  CHECK_FALSE(svc->try_acquire().has_value());
  const HttpReply busy = svc->render(request({{"id", "style_00"}}).dump());
  CHECK(busy.status == 503);
  CHECK(busy.headers.at("Retry-After") == "1");
  // Invalid requests are still rejected as such while saturated.
  CHECK(svc->render(request({{"id", "missing"}}).dump()).status == 422);
  s1.reset();
  CHECK(svc->in_flight() == 1);
  CHECK(svc->render(request({{"id", "style_00"}}).dump()).status == 200);
}

TEST_CASE("http round trip") {
  auto svc = open_service();
  const int port = svc->bind_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { svc->listen_after_bind(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);
  for (int i = 0; i < 200 && !svc->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  auto styles = client.Get("/styles");
  REQUIRE(styles);
  CHECK(styles->status == 200);
  CHECK(json::parse(styles->body).size() == 3);
  CHECK(styles->get_header_value("Access-Control-Allow-Origin") == "*");
  auto thumb = client.Get("/styles/content/thumbnail.png");
  REQUIRE(thumb);
  CHECK(thumb->status == 200);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(json::parse(health->body)["status"] == "ok");
  auto png = client.Post("/render", request({{"id", "style_01"}, {"intensity", 0.5}}).dump(), "application/json");
  REQUIRE(png);
  CHECK(png->status == 200);
  CHECK(png->has_header("X-Render-Time-Ms"));
  CHECK(png->body == svc->render(request({{"id", "style_01"}, {"intensity", 0.5}}).dump()).body);
  auto bad = client.Post("/render", request({{"id", "nope"}}).dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  CHECK(json::parse(bad->body).contains("error"));

  svc->stop();
  server.join();
  CHECK_FALSE(svc->running());
}
