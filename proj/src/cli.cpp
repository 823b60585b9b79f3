#include "rigidflow/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rigidflow/error.hpp"
#include "rigidflow/fieldops.hpp"
#include "rigidflow/io.hpp"
#include "rigidflow/metrics.hpp"
#include "rigidflow/synth.hpp"
#include "rigidflow/verify.hpp"
#include "rigidflow/viz.hpp"

namespace rigidflow {

namespace {

namespace fs = std::filesystem;

// Pixels whose 6x6 factorization failed, as a fraction of the grid, above
// which `solve` reports a numerical failure.
constexpr double kMaxFailedFraction = 0.01;

struct GenerateArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct SolveArgs {
  std::string scene;
  std::string out;
  std::string diagnostics;
  int iters = 16;
  int radius = 16;
  int stride = 1;
  double lambda = DampingParams{}.relative;
  std::string smoothing = "off";
  double noise_flow = 0.0;
  double noise_depth = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  int coarse_factor = 1;
};

struct EvalArgs {
  std::string scene;
  std::string field;
  std::string diagnostics;
  std::string out;
  std::string report = "json";
  std::optional<double> max_flow;
};

struct VizArgs {
  std::string scene;
  std::string field;
  std::string flow;
  std::string out;
  double max_radius = 0.0;
};

struct SelftestArgs {
  std::uint64_t seed = 7;
  std::string report = "text";
};

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo:
    case ErrorCode::kFormat:
      return kExitIo;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
      return kExitUsage;
    default:
      return kExitNumerical;
  }
}

bool field_is_finite(const Se3Field& field) {
  for (const auto& T : field.transforms.values()) {
    if (!T.rotation().coeffs().allFinite() || !T.translation().allFinite()) return false;
  }
  return true;
}

Se3Field crop(const Se3Field& field, int rows, int cols) {
  Se3Field out(rows, cols, 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = field(r, c);
  }
  return out;
}

int do_generate(const GenerateArgs& a) {
  SceneSpec spec = io::scene_spec_from_json(io::read_json(a.spec));
  if (a.seed) spec.seed = *a.seed;
  const SyntheticScene scene = generate(spec);
  io::write_scene(a.out, scene);
  std::cout << "scene " << spec.height << "x" << spec.width << " with " << scene.num_labels()
            << " layers written to " << a.out << "\n";
  return kExitOk;
}

int do_solve(const SolveArgs& a) {
  if (a.smoothing != "on" && a.smoothing != "off") {
    throw Error(ErrorCode::kInvalidArgument, "--smoothing expects on or off");
  }
  const SyntheticScene full = io::read_scene(a.scene);
  const SyntheticScene scene = downsample(full, a.coarse_factor);

  OracleConfig cfg;
  cfg.flow_noise_sigma = a.noise_flow;
  cfg.depth_noise_sigma = a.noise_depth;
  cfg.seed = a.seed;
  SyntheticOracle oracle(scene, cfg);

  SolverOptions opts;
  opts.iterations = a.iters;
  opts.neighborhood = Neighborhood{a.radius, a.stride};
  opts.damping.relative = a.lambda;
  opts.smoothing = a.smoothing == "on";
  opts.threads = a.threads;

  const auto evaluator = [&](const Se3Field& f) { return epe3d(f, scene); };
  SolveResult result = solve_scene(scene.depth1, scene.depth2, scene.spec.intrinsics, oracle, opts,
                                   evaluator);

  Se3Field field = std::move(result.field);
  if (a.coarse_factor > 1) {
    const auto weights = bilinear_upsample_weights(field.rows(), field.cols(), a.coarse_factor);
    field = crop(upsample_se3(field, weights), full.rows(), full.cols());
  }
  io::write_se3_field(a.out, field);

  const fs::path diag = a.diagnostics.empty() ? fs::path(a.out + ".diagnostics.json")
                                              : fs::path(a.diagnostics);
  io::write_json(diag, io::to_json(result.diagnostics));

  const int failed = result.diagnostics.empty() ? 0 : result.diagnostics.back().failed;
  const double failed_fraction =
      static_cast<double>(failed) / (static_cast<double>(scene.rows()) * scene.cols());
  if (failed_fraction > kMaxFailedFraction || !field_is_finite(field)) {
    std::cerr << "solve: numerical failure (" << failed << " pixels failed to factorize)\n";
    return kExitNumerical;
  }
  return kExitOk;
}

void print_text(std::ostream& os, const MetricReport& r) {
  os << std::setprecision(6);
  os << "pixels    " << r.pixel_count << "\n"
     << "epe2d     " << r.epe2d_mean << " px\n"
     << "epe3d     " << r.epe3d_mean << "\n"
     << "acc<1px   " << r.acc_1px << "\n"
     << "acc3d<.05 " << r.acc3d_05 << "\n"
     << "acc3d<.10 " << r.acc3d_10 << "\n";
}

int do_eval(const EvalArgs& a) {
  if (a.report != "json" && a.report != "text") {
    throw Error(ErrorCode::kInvalidArgument, "--report expects json or text");
  }
  const SyntheticScene scene = io::read_scene(a.scene);
  const Se3Field field = io::read_se3_field(a.field);
  Mask mask = scene.visible_mask();
  if (a.max_flow) mask = max_flow_mask(mask, scene.gt_flow, *a.max_flow);
  MetricReport report = evaluate(field, scene, mask);

  const fs::path diag = a.diagnostics.empty() ? fs::path(a.field + ".diagnostics.json")
                                              : fs::path(a.diagnostics);
  if (fs::exists(diag)) {
    for (const auto& it : io::read_json(diag)) {
      report.objective_curve.push_back(it.at("objective").get<double>());
      report.update_norm_curve.push_back(it.at("mean_update_norm").get<double>());
      report.epe3d_curve.push_back(it.at("epe3d").get<double>());
    }
  }

  const auto j = io::to_json(report);
  if (!a.out.empty()) io::write_json(a.out, j);
  if (a.report == "json") {
    std::cout << j.dump(2) << "\n";
  } else {
    print_text(std::cout, report);
  }
  return kExitOk;
}

int do_viz(const VizArgs& a) {
  fs::create_directories(a.out);
  if (!a.flow.empty()) {
    const FlowField3 flow = io::read_flo(a.flow);
    io::write_ppm(fs::path(a.out) / "flow.ppm", flow.rows(), flow.cols(),
                  flow_to_rgb(flow, a.max_radius));
    return kExitOk;
  }
  if (a.field.empty() || a.scene.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "viz needs --flow, or --field together with --scene");
  }
  const SyntheticScene scene = io::read_scene(a.scene);
  const Se3Field field = io::read_se3_field(a.field);
  const FlowField3 flow = induced_flow(field, scene.depth1, scene.spec.intrinsics);
  const Grid<Twist> twists = twist_field(field);
  const fs::path dir(a.out);
  io::write_ppm(dir / "flow.ppm", flow.rows(), flow.cols(), flow_to_rgb(flow, a.max_radius));
  io::write_ppm(dir / "tau.ppm", field.rows(), field.cols(), twist_to_rgb(twists, true));
  io::write_ppm(dir / "phi.ppm", field.rows(), field.cols(), twist_to_rgb(twists, false));
  return kExitOk;
}

int do_selftest(const SelftestArgs& a) {
  const auto results = verify::run_selftest(a.seed);
  bool ok = true;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    if (a.report == "json") {
      j.push_back({{"name", r.name}, {"error", r.error}, {"tolerance", r.tolerance},
                   {"passed", r.passed}, {"detail", r.detail}});
    } else {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.error << " (tol "
                << r.tolerance << ") " << r.detail << "\n";
    }
  }
  if (a.report == "json") std::cout << j.dump(2) << "\n";
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Dense per-pixel SE(3) motion estimation on synthetic rigid scenes", "dense_se3"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic scene from a JSON scene description");
  g->add_option("--spec", gen.spec, "Scene description JSON")->required();
  g->add_option("--out", gen.out, "Output scene directory")->required();
  g->add_option("--seed", gen.seed, "Override the seed in the description");

  SolveArgs sol;
  auto* s = app.add_subcommand("solve", "Estimate the SE(3) field of a scene");
  s->add_option("--scene", sol.scene, "Scene directory")->required();
  s->add_option("--out", sol.out, "Output field file")->required();
  s->add_option("--diagnostics", sol.diagnostics, "Diagnostics JSON (default: <out>.diagnostics.json)");
  s->add_option("--iters", sol.iters, "Gauss-Newton iterations")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--radius", sol.radius, "Neighborhood radius")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--stride", sol.stride, "Neighborhood stride")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--lambda", sol.lambda, "Relative damping on diag(H)")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--smoothing", sol.smoothing, "Embedding smoothing")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  s->add_option("--noise-flow", sol.noise_flow, "Revision noise on (x, y) in pixels")->check(CLI::NonNegativeNumber);
  s->add_option("--noise-depth", sol.noise_depth, "Revision noise on inverse depth")->check(CLI::NonNegativeNumber);
  s->add_option("--seed", sol.seed, "Oracle noise seed");
  s->add_option("--threads", sol.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--coarse-factor", sol.coarse_factor, "Solve on every n-th pixel and upsample")->check(CLI::PositiveNumber)->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a field against the scene ground truth");
  e->add_option("--scene", ev.scene, "Scene directory")->required();
  e->add_option("--field", ev.field, "Field file")->required();
  e->add_option("--diagnostics", ev.diagnostics, "Solver diagnostics JSON (default: <field>.diagnostics.json)");
  e->add_option("--out", ev.out, "Also write the report here");
  e->add_option("--report", ev.report, "Output format")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  e->add_option("--max-flow", ev.max_flow, "Ignore pixels whose true 2D flow exceeds this")->check(CLI::PositiveNumber);

  VizArgs vz;
  auto* v = app.add_subcommand("viz", "Render flow and twist fields as PPM images");
  v->add_option("--scene", vz.scene, "Scene directory (for depth)");
  v->add_option("--field", vz.field, "Field file");
  v->add_option("--flow", vz.flow, "Middlebury .flo file");
  v->add_option("--out", vz.out, "Output directory")->required();
  v->add_option("--max-radius", vz.max_radius, "Flow magnitude mapped to full saturation");

  SelftestArgs st;
  auto* t = app.add_subcommand("selftest", "Run the numerical self-checks");
  t->add_option("--seed", st.seed)->capture_default_str();
  t->add_option("--report", st.report)->check(CLI::IsMember({"json", "text"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return do_generate(gen);
    if (*s) return do_solve(sol);
    if (*e) return do_eval(ev);
    if (*v) return do_viz(vz);
    if (*t) return do_selftest(st);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code_for(err);
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace rigidflow
