#include <doctest.h>

#include <thread>

// Eigen first: the resolver header pulled in by httplib defines a _res macro.
#include "support.hpp"

#include <httplib.h>

#include "trackbench/image.hpp"
#include "trackbench/keypoints_io.hpp"
#include "trackbench/service.hpp"

using namespace trackbench;
using namespace trackbench::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Images {
  testing::TempDir dir{"svc"};
  fs::path camera = dir / "camera.png";
  fs::path twin = dir / "twin.pgm";
  Images() {
    GrayImage cam(640, 480, 30);
    cam.at(10, 10) = 200;
    save_png(cam, camera);
    save_pgm(GrayImage(2000, 2000, 90), twin);
  }
};

json pair_json(const KeypointPair& p) {
  return {{"camera", {p.camera.x(), p.camera.y()}}, {"twin", {p.twin.x(), p.twin.y()}}};
}

KeypointSet sample_pairs(std::size_t n, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  return testing::exact_keypoints(testing::random_offset_homography(rng), n, rng);
}

// Runs an httplib server on an ephemeral port for the lifetime of the object.
class TestServer {
 public:
  explicit TestServer(CalibrationService& svc) {
    mount(server_, svc);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() { server_.stop(); }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
};

}  // namespace

TEST_CASE("service without a session") {
  CalibrationService svc;
  CHECK(svc.session().status == 404);
  CHECK(svc.diagnostics().status == 404);
  CHECK(svc.add_keypoint(json::object()).status == 404);
  CHECK(svc.diagnostics().body["error"] == "NoSession");
  CHECK_FALSE(svc.image(Frame::Camera));
}

TEST_CASE("keypoint editing and live diagnostics") {
  Images img;
  CalibrationService svc;
  const auto started = svc.start_session(img.camera, img.twin);
  REQUIRE(started.status == 200);
  CHECK(started.body["image_size_twin"] == json({2000, 2000}));

  const auto pairs = sample_pairs(6);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto r = svc.add_keypoint(pair_json(pairs.pairs()[i]));
    CHECK(r.status == 200);
    CHECK(r.body["status"] == "pending");
    CHECK(r.body["count"] == i + 1);
  }
  auto r = svc.add_keypoint(pair_json(pairs.pairs()[3]));
  CHECK(r.body["status"] == "ok");
  CHECK(r.body["diagnostics"]["average_error_px"].get<double>() < 1e-6);
  CHECK(r.body["leave_one_out"].is_null());

  SUBCASE("out of bounds and malformed pairs are rejected") {
    json bad = pair_json(pairs.pairs()[4]);
    bad["camera"][0] = -5.0;
    r = svc.add_keypoint(bad);
    CHECK(r.status == 400);
    CHECK(r.body["error"] == "OutOfBounds");
    CHECK(svc.add_keypoint({{"camera", {1, 2}}}).status == 400);
    CHECK(svc.add_keypoint({{"camera", "x"}, {"twin", {1, 2}}}).status == 400);
    CHECK(svc.diagnostics().body["count"] == 4);
  }
  SUBCASE("removal") {
    r = svc.add_keypoint(pair_json(pairs.pairs()[4]));
    CHECK(r.body["leave_one_out"].is_object());
    r = svc.remove_keypoint(0);
    CHECK(r.status == 200);
    CHECK(r.body["count"] == 4);
    CHECK(r.body["status"] == "ok");
    r = svc.remove_keypoint(3);
    CHECK(r.body["status"] == "pending");
    r = svc.remove_keypoint(99);
    CHECK(r.status == 404);
    CHECK(r.body["error"] == "IndexOutOfRange");
  }
  SUBCASE("degenerate placement is reported, not thrown") {
    Images other;
    CalibrationService s2;
    s2.start_session(other.camera, other.twin);
    for (double x : {10.0, 20.0, 30.0, 40.0}) {
      s2.add_keypoint({{"camera", {x, x}}, {"twin", {x, x}}});
    }
    CHECK(s2.diagnostics().body["status"] == "degenerate");
  }
  SUBCASE("error curve") {
    CHECK(svc.error_curve().status == 409);
    svc.add_keypoint(pair_json(pairs.pairs()[4]));
    svc.add_keypoint(pair_json(pairs.pairs()[5]));
    const auto c = svc.error_curve();
    CHECK(c.status == 200);
    REQUIRE(c.body["curve"].size() == 3);
    CHECK(c.body["curve"][0]["keypoint_count"] == 4);
    for (const auto& e : c.body["curve"]) CHECK(e["average_error_px"].get<double>() < 1e-6);
  }
}

TEST_CASE("export round trip") {
  Images img;
  CalibrationService svc;
  svc.start_session(img.camera, img.twin);
  const auto pairs = sample_pairs(6, 9);
  svc.add_keypoint(pair_json(pairs.pairs()[0]));
  svc.add_keypoint(pair_json(pairs.pairs()[1]));
  CHECK(svc.export_keypoints(img.dir / "few.json").status == 409);
  CHECK_FALSE(fs::exists(img.dir / "few.json"));

  for (std::size_t i = 2; i < 6; ++i) svc.add_keypoint(pair_json(pairs.pairs()[i]));
  const fs::path out = img.dir / "keypoints.json";
  REQUIRE(svc.export_keypoints(out).status == 200);

  const KeypointSet loaded = load_keypoints(out);
  CHECK(loaded.size() == 6);
  CHECK(loaded.camera_size() == ImageSize{640, 480});
  CHECK(loaded.twin_size() == ImageSize{2000, 2000});
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(loaded.pairs()[i].camera == pairs.pairs()[i].camera);
    CHECK(loaded.pairs()[i].twin == pairs.pairs()[i].twin);
  }
  // Diagnostics recomputed from the file match the live ones exactly.
  const Homography h = estimate_homography(loaded);
  CHECK(diagnostics_to_json(reprojection_diagnostics(h, loaded)) == svc.diagnostics().body["diagnostics"]);
  CHECK(homography_to_json(h) == svc.diagnostics().body["homography"]);

  CHECK(svc.export_keypoints(img.dir / "missing" / "k.json").status == 400);
}

TEST_CASE("sessions and images") {
  Images img;
  CalibrationService svc;
  CHECK(svc.start_session(img.camera, img.dir / "nope.png").status == 400);
  CHECK(svc.session().status == 404);

  const auto first = svc.start_session(img.camera, img.twin);
  svc.add_keypoint(pair_json(sample_pairs(1).pairs()[0]));
  const auto second = svc.start_session(img.camera, img.twin);
  CHECK(first.body["session_id"] != second.body["session_id"]);
  CHECK(svc.session().body["pairs"].empty());

  const auto cam = svc.image(Frame::Camera);
  REQUIRE(cam);
  CHECK(cam->content_type == "image/png");
  CHECK(cam->bytes == testing::read_file(img.camera));
  const auto twin = svc.image(Frame::Twin);
  REQUIRE(twin);
  const GrayImage decoded = decode_image(
      std::span(reinterpret_cast<const std::uint8_t*>(twin->bytes.data()), twin->bytes.size()));
  CHECK(decoded.width == 2000);
  CHECK(decoded.at(5, 5) == 90);
}

TEST_CASE("replaying the final set gives the same diagnostics") {
  // Property: any add/remove history ends in the same state as adding the
  // surviving pairs in order to a fresh session.
  Images img;
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pool = sample_pairs(12, 100 + trial);
    CalibrationService edited;
    edited.start_session(img.camera, img.twin);
    std::vector<std::size_t> alive;
    std::size_t next = 0;
    while (next < pool.size()) {
      if (!alive.empty() && rng() % 3 == 0) {
        const std::size_t k = rng() % alive.size();
        REQUIRE(edited.remove_keypoint(k).status == 200);
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        REQUIRE(edited.add_keypoint(pair_json(pool.pairs()[next])).status == 200);
        alive.push_back(next++);
      }
    }
    CalibrationService fresh;
    fresh.start_session(img.camera, img.twin);
    for (auto i : alive) fresh.add_keypoint(pair_json(pool.pairs()[i]));
    CHECK(edited.diagnostics().body == fresh.diagnostics().body);
  }
}

TEST_CASE("http routes") {
  Images img;
  CalibrationService svc;
  TestServer server(svc);
  auto cli = server.client();

  auto post = [&](const std::string& path, const json& body) {
    auto res = cli.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return res;
  };

  CHECK(cli.Get("/session")->status == 404);
  CHECK(post("/session", {{"camera_path", img.camera.string()}})->status == 400);
  CHECK(cli.Post("/keypoints", "{oops", "application/json")->status == 400);

  auto res = post("/session", {{"camera_path", img.camera.string()}, {"twin_path", img.twin.string()}});
  REQUIRE(res->status == 200);

  const auto pairs = sample_pairs(5, 77);
  for (const auto& p : pairs.pairs()) CHECK(post("/keypoints", pair_json(p))->status == 200);
  res = cli.Get("/diagnostics");
  REQUIRE(res);
  const json diag = json::parse(res->body);
  CHECK(diag["status"] == "ok");
  CHECK(diag["diagnostics"]["average_error_px"].get<double>() < 1e-6);
  CHECK(diag == svc.diagnostics().body);

  res = cli.Get("/image/camera");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  CHECK(res->body == testing::read_file(img.camera));
  CHECK(cli.Get("/image/twin")->status == 200);

  CHECK(cli.Get("/error-curve")->status == 200);
  CHECK(cli.Delete("/keypoints/99")->status == 404);
  res = cli.Delete("/keypoints/0");
  REQUIRE(res);
  CHECK(json::parse(res->body)["count"] == 4);
  CHECK(cli.Get("/error-curve")->status == 409);

  const fs::path out = img.dir / "exported.json";
  CHECK(post("/export", {{"path", out.string()}})->status == 200);
  CHECK(load_keypoints(out).size() == 4);
  CHECK(post("/export", json::object())->status == 400);

  res = cli.Get("/session");
  REQUIRE(res);
  const json session = json::parse(res->body);
  CHECK(session["pairs"].size() == 4);
  CHECK(session["calibration"]["status"] == "ok");
}
