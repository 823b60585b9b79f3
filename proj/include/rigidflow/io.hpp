#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "rigidflow/field.hpp"
#include "rigidflow/fieldops.hpp"
#include "rigidflow/metrics.hpp"
#include "rigidflow/synth.hpp"

namespace rigidflow::io {

namespace fs = std::filesystem;

/// Middlebury .flo: "PIEH", int32 width, int32 height, float32 (u, v)
/// interleaved, little-endian. Invalid pixels are written as 1e10.
void write_flo(const fs::path& path, const FlowField3& flow);
/// Reads (u, v); the third channel is zero. Components above 1e9 mark invalid pixels.
FlowField3 read_flo(const fs::path& path);

/// Single-channel "Pf" float map, little-endian (negative scale), bottom row first.
void write_pfm(const fs::path& path, const Grid<double>& values);
Grid<double> read_pfm(const fs::path& path);

/// Binary 8-bit "P5" graymap.
void write_pgm(const fs::path& path, const Grid<std::uint8_t>& values);
Grid<std::uint8_t> read_pgm(const fs::path& path);

/// Binary "P6" color image; rgb holds 3 bytes per pixel, row-major.
void write_ppm(const fs::path& path, int rows, int cols, const std::vector<std::uint8_t>& rgb);

/// "SE3F", int32 H, int32 W, then per pixel 7 float64 (qw qx qy qz tx ty tz),
/// row-major, little-endian.
void write_se3_field(const fs::path& path, const Se3Field& field);
Se3Field read_se3_field(const fs::path& path);

/// KITTI 16-bit PNG disparity: value / 256, 0 marks invalid.
Grid<double> read_kitti_disparity(const fs::path& path);
/// KITTI 16-bit RGB PNG flow: (R - 2^15) / 64, (G - 2^15) / 64, B = valid.
FlowField3 read_kitti_flow(const fs::path& path);
/// 16-bit PNG writer used to produce KITTI-layout files (1 or 3 channels).
void write_png16(const fs::path& path, int rows, int cols, int channels,
                 const std::vector<std::uint16_t>& samples);

nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const std::vector<IterationDiagnostics>& diagnostics);

nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

/// Scene directory layout: spec.json, invdepth1.pfm, invdepth2.pfm, flow.flo,
/// flow_dd.pfm (inverse depth change), labels.pgm, occlusion.pgm, gt.se3.
void write_scene(const fs::path& dir, const SyntheticScene& scene);
/// Ground-truth flow is recomputed from gt.se3 and invdepth1.pfm so that it
/// is exactly consistent with the loaded depth.
SyntheticScene read_scene(const fs::path& dir);

}  // namespace rigidflow::io
