#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rigidflow/cli.hpp"
#include "rigidflow/field.hpp"
#include "rigidflow/io.hpp"
#include "support.hpp"

using namespace rigidflow;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string("\"") + RIGIDFLOW_CLI + "\" " + args;
  cmd += log.empty() ? " >/dev/null 2>&1" : " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir = testing::scratch_dir("cli");
  fs::path scene = dir / "scene";

  Workspace() {
    io::write_json(dir / "spec.json", {{"height", 32},
                                       {"width", 40},
                                       {"num_objects", 2},
                                       {"seed", 9},
                                       {"intrinsics", {{"fx", 40}, {"fy", 40}, {"cx", 20}, {"cy", 16}}}});
    REQUIRE(run("generate --spec " + (dir / "spec.json").string() + " --out " + scene.string()) == kExitOk);
  }
  ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == kExitUsage);
  CHECK(run("frobnicate") == kExitUsage);
  CHECK(run("solve --scene /nonexistent") == kExitUsage);
  CHECK(run("solve --scene x --out y --radius 0") == kExitUsage);
  CHECK(run("eval --scene x --field y --report xml") == kExitUsage);
  CHECK(run("--help") == kExitOk);
}

TEST_CASE("missing inputs exit with 2") {
  CHECK(run("generate --spec /nonexistent/spec.json --out /tmp/never") == kExitIo);
  CHECK(run("solve --scene /nonexistent --out /tmp/never.se3") == kExitIo);
  CHECK(run("viz --flow /nonexistent.flo --out /tmp/never") == kExitIo);
}

TEST_CASE("selftest passes") {
  const auto dir = testing::scratch_dir("cli_selftest");
  CHECK(run("selftest --report json", dir / "out.json") == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "out.json"));
  CHECK(j.size() >= 9);
  for (const auto& check : j) CHECK(check.at("passed").get<bool>());
  fs::remove_all(dir);
}

TEST_CASE("generate solve eval") {
  Workspace ws;
  const fs::path field = ws.dir / "field.se3";
  REQUIRE(run("solve --scene " + ws.scene.string() + " --out " + field.string() +
              " --iters 4 --radius 4") == kExitOk);
  CHECK(fs::exists(field.string() + ".diagnostics.json"));
  CHECK(io::read_json(field.string() + ".diagnostics.json").size() == 4);

  REQUIRE(run("eval --scene " + ws.scene.string() + " --field " + field.string() + " --out " +
                  (ws.dir / "report.json").string(),
              ws.dir / "stdout.json") == kExitOk);
  const auto printed = nlohmann::json::parse(slurp(ws.dir / "stdout.json"));
  const auto written = io::read_json(ws.dir / "report.json");
  CHECK(printed == written);
  CHECK(printed.at("curves").at("epe3d").size() == 4);
  CHECK(printed.at("epe3d_mean").get<double>() < 0.05);

  CHECK(run("eval --scene " + ws.scene.string() + " --field " + field.string() + " --report text",
            ws.dir / "stdout.txt") == kExitOk);
  CHECK(slurp(ws.dir / "stdout.txt").find("epe3d") != std::string::npos);
}

TEST_CASE("solve with a coarse factor keeps the full extent") {
  Workspace ws;
  const fs::path field = ws.dir / "coarse.se3";
  REQUIRE(run("solve --scene " + ws.scene.string() + " --out " + field.string() +
              " --iters 3 --radius 3 --coarse-factor 2") == kExitOk);
  const Se3Field f = io::read_se3_field(field);
  CHECK(f.rows() == 32);
  CHECK(f.cols() == 40);
}

TEST_CASE("eval rejects a field of the wrong extent") {
  Workspace ws;
  io::write_se3_field(ws.dir / "small.se3", Se3Field(4, 4));
  CHECK(run("eval --scene " + ws.scene.string() + " --field " + (ws.dir / "small.se3").string()) ==
        kExitUsage);
}

TEST_CASE("viz of the identity field is uniform gray") {
  Workspace ws;
  io::write_se3_field(ws.dir / "id.se3", Se3Field(32, 40));
  REQUIRE(run("viz --scene " + ws.scene.string() + " --field " + (ws.dir / "id.se3").string() +
              " --out " + (ws.dir / "viz").string()) == kExitOk);
  const std::string ppm = slurp(ws.dir / "viz" / "flow.ppm");
  const std::string header = "P6\n40 32\n255\n";
  REQUIRE(ppm.size() == header.size() + 32 * 40 * 3);
  CHECK(ppm.substr(0, header.size()) == header);
  bool uniform = true;
  for (std::size_t i = header.size(); i < ppm.size(); ++i) {
    uniform = uniform && static_cast<unsigned char>(ppm[i]) == 128;
  }
  CHECK(uniform);
  CHECK(fs::exists(ws.dir / "viz" / "tau.ppm"));
  CHECK(fs::exists(ws.dir / "viz" / "phi.ppm"));
}
