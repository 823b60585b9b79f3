#include <cstring>
#include <functional>
#include <fstream>
#include <random>

#include "doctest.h"
#include "rigidflow/error.hpp"
#include "rigidflow/io.hpp"
#include "rigidflow/synth.hpp"
#include "rigidflow/verify.hpp"
#include "support.hpp"

using namespace rigidflow;
namespace fs = std::filesystem;

namespace {

// Values that survive float32 storage unchanged. The volatile keeps GCC 11's
// -O3 vectorizer from folding the double -> float -> double round trip away.
double f32(double x) {
  volatile float f = static_cast<float>(x);
  return static_cast<double>(f);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string head_bytes(const fs::path& p, std::size_t n) {
  std::ifstream in(p, std::ios::binary);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

TEST_CASE("flo roundtrip") {
  const auto dir = testing::scratch_dir("flo");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 20);
  FlowField3 flow(7, 9);
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    flow.values[i] = Vector3(f32(n(rng)), f32(n(rng)), 0.0);
    flow.valid[i] = i % 5 != 0;
  }
  io::write_flo(dir / "a.flo", flow);
  CHECK(head_bytes(dir / "a.flo", 4) == "PIEH");
  CHECK(fs::file_size(dir / "a.flo") == 12 + 7 * 9 * 8);
  const FlowField3 back = io::read_flo(dir / "a.flo");
  CHECK(back.valid == flow.valid);
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    if (flow.valid[i]) CHECK(back.values[i] == flow.values[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("pfm roundtrip") {
  const auto dir = testing::scratch_dir("pfm");
  Grid<double> g(5, 3, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = f32(0.1 * static_cast<double>(i) - 0.7);
  io::write_pfm(dir / "a.pfm", g);
  CHECK(head_bytes(dir / "a.pfm", 3) == "Pf\n");
  CHECK(io::read_pfm(dir / "a.pfm") == g);
  fs::remove_all(dir);
}

TEST_CASE("pfm stores the bottom row first") {
  const auto dir = testing::scratch_dir("pfm_order");
  Grid<double> g(2, 1, 0.0);
  g(0, 0) = 1.0;
  g(1, 0) = 2.0;
  io::write_pfm(dir / "a.pfm", g);
  std::ifstream in(dir / "a.pfm", std::ios::binary);
  std::string line;
  for (int i = 0; i < 3; ++i) std::getline(in, line);
  float first = 0.0f;
  in.read(reinterpret_cast<char*>(&first), sizeof first);
  CHECK(first == 2.0f);
  fs::remove_all(dir);
}

TEST_CASE("se3 field roundtrip is bitwise") {
  const auto dir = testing::scratch_dir("se3");
  std::mt19937_64 rng(2);
  Se3Field f(6, 4);
  for (auto& T : f.transforms.values()) T = verify::random_transform(rng, 3.0, 5.0);
  io::write_se3_field(dir / "f.se3", f);
  CHECK(head_bytes(dir / "f.se3", 4) == "SE3F");
  CHECK(fs::file_size(dir / "f.se3") == 12 + 24 * 7 * 8);
  CHECK(io::read_se3_field(dir / "f.se3") == f);
  fs::remove_all(dir);
}

TEST_CASE("pgm and ppm") {
  const auto dir = testing::scratch_dir("pgm");
  Grid<std::uint8_t> g(3, 4, 0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::uint8_t>(i * 20);
  io::write_pgm(dir / "a.pgm", g);
  CHECK(io::read_pgm(dir / "a.pgm") == g);
  io::write_ppm(dir / "a.ppm", 2, 2, std::vector<std::uint8_t>(12, 128));
  CHECK(head_bytes(dir / "a.ppm", 2) == "P6");
  CHECK_THROWS_AS(io::write_ppm(dir / "b.ppm", 2, 2, std::vector<std::uint8_t>(11, 0)), Error);
  fs::remove_all(dir);
}

TEST_CASE("kitti png readers") {
  const auto dir = testing::scratch_dir("kitti");
  io::write_png16(dir / "disp.png", 2, 2, 1, {0, 256, 512, 1000});
  const Grid<double> disp = io::read_kitti_disparity(dir / "disp.png");
  CHECK(disp(0, 0) == 0.0);
  CHECK(disp(0, 1) == 1.0);
  CHECK(disp(1, 0) == 2.0);
  CHECK(disp(1, 1) == 1000.0 / 256.0);

  // (R - 2^15) / 64, (G - 2^15) / 64, B = valid.
  io::write_png16(dir / "flow.png", 1, 2, 3, {32768 + 64, 32768 - 128, 1, 0, 0, 0});
  const FlowField3 flow = io::read_kitti_flow(dir / "flow.png");
  CHECK(flow.valid(0, 0) == 1);
  CHECK(flow.values(0, 0).x() == 1.0);
  CHECK(flow.values(0, 0).y() == -2.0);
  CHECK(flow.valid(0, 1) == 0);
  CHECK(code_of([&] { io::read_kitti_flow(dir / "disp.png"); }) == ErrorCode::kFormat);
  fs::remove_all(dir);
}

TEST_CASE("scene description json") {
  SceneSpec s;
  s.height = 33;
  s.width = 45;
  s.num_objects = 3;
  s.depth_min = 1.5;
  s.depth_max = 9.25;
  s.motion_scale = 0.2;
  s.seed = 1234567890123ULL;
  s.intrinsics = {101.5, 99.0, 22.0, 16.5};
  CHECK(io::scene_spec_from_json(io::to_json(s)) == s);
  CHECK(io::scene_spec_from_json(nlohmann::json::parse(io::to_json(s).dump())) == s);
  CHECK(io::scene_spec_from_json(nlohmann::json::object()) == SceneSpec{});
  CHECK(code_of([] { io::scene_spec_from_json({{"depth_range", nlohmann::json::array({1.0})}}); }) == ErrorCode::kFormat);
  CHECK(code_of([] { io::scene_spec_from_json({{"height", "tall"}}); }) == ErrorCode::kFormat);
}

TEST_CASE("metric report json keys are fixed") {
  MetricReport r;
  r.epe3d_curve = {0.5, 0.25};
  const auto j = io::to_json(r);
  for (const char* key : {"epe2d_mean", "epe3d_mean", "acc_1px", "acc3d_05", "acc3d_10", "pixel_count", "curves"}) {
    CHECK(j.contains(key));
  }
  CHECK(j.at("curves").at("epe3d").size() == 2);
}

TEST_CASE("scene directory roundtrip") {
  const auto dir = testing::scratch_dir("scene");
  SceneSpec spec;
  spec.height = 40;
  spec.width = 52;
  spec.intrinsics = {52, 52, 26, 20};
  spec.num_objects = 3;
  const SyntheticScene scene = generate(spec);
  io::write_scene(dir, scene);
  for (const char* name : {"spec.json", "invdepth1.pfm", "invdepth2.pfm", "flow.flo", "flow_dd.pfm",
                           "labels.pgm", "occlusion.pgm", "gt.se3"}) {
    CHECK(fs::exists(dir / name));
  }
  const SyntheticScene back = io::read_scene(dir);
  CHECK(back.spec == scene.spec);
  CHECK(back.labels == scene.labels);
  CHECK(back.occluded == scene.occluded);
  CHECK(back.gt_field == scene.gt_field);
  CHECK(back.num_labels() == scene.num_labels());
  for (std::size_t i = 0; i < scene.depth1.values.size(); ++i) {
    CHECK(back.depth1.values[i] == f32(scene.depth1.values[i]));
    CHECK(back.gt_flow.valid[i] == scene.gt_flow.valid[i]);
    if (scene.gt_flow.valid[i]) {
      CHECK((back.gt_flow.values[i] - scene.gt_flow.values[i]).cwiseAbs().maxCoeff() < 1e-4);
    }
  }
  // A second load is bit-identical to the first.
  const SyntheticScene again = io::read_scene(dir);
  CHECK(again.depth1.values == back.depth1.values);
  CHECK(checksum(again.gt_flow) == checksum(back.gt_flow));
  fs::remove_all(dir);
}

TEST_CASE("io errors") {
  const auto dir = testing::scratch_dir("errors");
  CHECK(code_of([&] { io::read_flo(dir / "missing.flo"); }) == ErrorCode::kIo);
  CHECK(code_of([&] { io::read_se3_field(dir / "missing.se3"); }) == ErrorCode::kIo);
  std::ofstream(dir / "junk.flo") << "NOPE and some more bytes";
  CHECK(code_of([&] { io::read_flo(dir / "junk.flo"); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { io::read_se3_field(dir / "junk.flo"); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { io::read_pfm(dir / "junk.flo"); }) == ErrorCode::kFormat);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(code_of([&] { io::read_json(dir / "bad.json"); }) == ErrorCode::kFormat);
  fs::remove_all(dir);
}
