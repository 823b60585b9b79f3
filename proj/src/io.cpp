#include "rigidflow/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <png.h>

namespace rigidflow::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = std::bit_cast<U>(value);
    U swapped = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      swapped = (swapped << 8) | (bits & 0xff);
      bits >>= 8;
    }
    return std::bit_cast<T>(swapped);
  }
}

template <typename T>
T byteswap(T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  U swapped = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    swapped = (swapped << 8) | (bits & 0xff);
    bits >>= 8;
  }
  return std::bit_cast<T>(swapped);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return in;
}

template <typename T>
void put(std::ostream& out, T value) {
  const T le = to_little(value);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::kFormat, "truncated file " + path.string());
  }
  return to_little(value);
}

void check_written(const std::ostream& out, const fs::path& path) {
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// Reads the next whitespace-delimited header token of a netpbm-style file.
std::string header_token(std::istream& in, const fs::path& path) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw Error(ErrorCode::kFormat, "truncated header in " + path.string());
  return token;
}

int header_int(std::istream& in, const fs::path& path) {
  const std::string t = header_token(in, path);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(t, &pos);
    if (pos != t.size() || v <= 0) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "bad header value '" + t + "' in " + path.string());
  }
}

constexpr float kUnknownFlow = 1e10f;

}  // namespace

void write_flo(const fs::path& path, const FlowField3& flow) {
  auto out = open_out(path);
  out.write("PIEH", 4);
  put<std::int32_t>(out, flow.cols());
  put<std::int32_t>(out, flow.rows());
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    const bool ok = flow.valid[i] != 0;
    put<float>(out, ok ? static_cast<float>(flow.values[i].x()) : kUnknownFlow);
    put<float>(out, ok ? static_cast<float>(flow.values[i].y()) : kUnknownFlow);
  }
  check_written(out, path);
}

FlowField3 read_flo(const fs::path& path) {
  auto in = open_in(path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PIEH", 4) != 0) {
    throw Error(ErrorCode::kFormat, "missing PIEH magic in " + path.string());
  }
  const auto width = get<std::int32_t>(in, path);
  const auto height = get<std::int32_t>(in, path);
  if (width <= 0 || height <= 0 || width > (1 << 16) || height > (1 << 16)) {
    throw Error(ErrorCode::kFormat, "implausible .flo extent in " + path.string());
  }
  FlowField3 flow(height, width);
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    const float u = get<float>(in, path);
    const float v = get<float>(in, path);
    const bool ok = std::isfinite(u) && std::isfinite(v) && std::abs(u) <= 1e9f &&
                    std::abs(v) <= 1e9f;
    flow.values[i] = ok ? Vector3(u, v, 0.0) : Vector3::Zero();
    flow.valid[i] = ok ? 1 : 0;
  }
  return flow;
}

void write_pfm(const fs::path& path, const Grid<double>& values) {
  auto out = open_out(path);
  out << "Pf\n" << values.cols() << " " << values.rows() << "\n-1.0\n";
  for (int r = values.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < values.cols(); ++c) {
      put<float>(out, static_cast<float>(values(r, c)));
    }
  }
  check_written(out, path);
}

Grid<double> read_pfm(const fs::path& path) {
  auto in = open_in(path);
  const std::string kind = header_token(in, path);
  if (kind != "Pf" && kind != "PF") {
    throw Error(ErrorCode::kFormat, "not a PFM file: " + path.string());
  }
  const int channels = kind == "PF" ? 3 : 1;
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const std::string scale_token = header_token(in, path);
  double scale;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "bad PFM scale in " + path.string());
  }
  if (scale == 0.0) throw Error(ErrorCode::kFormat, "zero PFM scale in " + path.string());
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);

  Grid<double> values(height, width, 0.0);
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      for (int k = 0; k < channels; ++k) {
        float v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
          throw Error(ErrorCode::kFormat, "truncated PFM data in " + path.string());
        }
        if (swap) v = byteswap(v);
        if (k == 0) values(r, c) = v;
      }
    }
  }
  return values;
}

void write_pgm(const fs::path& path, const Grid<std::uint8_t>& values) {
  auto out = open_out(path);
  out << "P5\n" << values.cols() << " " << values.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(values.values().data()),
            static_cast<std::streamsize>(values.size()));
  check_written(out, path);
}

Grid<std::uint8_t> read_pgm(const fs::path& path) {
  auto in = open_in(path);
  if (header_token(in, path) != "P5") {
    throw Error(ErrorCode::kFormat, "not a binary PGM: " + path.string());
  }
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval > 255) throw Error(ErrorCode::kFormat, "16-bit PGM not supported: " + path.string());
  Grid<std::uint8_t> values(height, width, 0);
  if (!in.read(reinterpret_cast<char*>(values.values().data()),
               static_cast<std::streamsize>(values.size()))) {
    throw Error(ErrorCode::kFormat, "truncated PGM data in " + path.string());
  }
  return values;
}

void write_ppm(const fs::path& path, int rows, int cols, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 3) {
    throw Error(ErrorCode::kShapeMismatch, "PPM buffer size");
  }
  auto out = open_out(path);
  out << "P6\n" << cols << " " << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  check_written(out, path);
}

void write_se3_field(const fs::path& path, const Se3Field& field) {
  auto out = open_out(path);
  out.write("SE3F", 4);
  put<std::int32_t>(out, field.rows());
  put<std::int32_t>(out, field.cols());
  for (const Se3Transform& T : field.transforms.values()) {
    const auto& q = T.rotation();
    const auto& t = T.translation();
    for (double v : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()}) put<double>(out, v);
  }
  check_written(out, path);
}

Se3Field read_se3_field(const fs::path& path) {
  auto in = open_in(path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SE3F", 4) != 0) {
    throw Error(ErrorCode::kFormat, "missing SE3F magic in " + path.string());
  }
  const auto rows = get<std::int32_t>(in, path);
  const auto cols = get<std::int32_t>(in, path);
  if (rows <= 0 || cols <= 0 || rows > (1 << 16) || cols > (1 << 16)) {
    throw Error(ErrorCode::kFormat, "implausible SE3 field extent in " + path.string());
  }
  Se3Field field(rows, cols);
  for (auto& T : field.transforms.values()) {
    double v[7];
    for (double& x : v) x = get<double>(in, path);
    const Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
    if (!q.coeffs().allFinite() || std::abs(q.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::kFormat, "non-unit quaternion in " + path.string());
    }
    T = Se3Transform::from_raw(q, Vector3(v[4], v[5], v[6]));
  }
  return field;
}

namespace {

struct PngImage {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<std::uint16_t> samples;
};

PngImage read_png16(const fs::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    std::fclose(fp);
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIo, "libpng initialization failed");
  }
  PngImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::kFormat, "invalid PNG " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::kFormat, "expected a 16-bit PNG: " + path.string());
  }
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  img.rows = static_cast<int>(png_get_image_height(png, info));
  img.cols = static_cast<int>(png_get_image_width(png, info));
  img.channels = png_get_channels(png, info);
  img.samples.resize(static_cast<std::size_t>(img.rows) * img.cols * img.channels);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(img.rows));
  for (int r = 0; r < img.rows; ++r) {
    row_ptrs[static_cast<std::size_t>(r)] = reinterpret_cast<png_bytep>(
        img.samples.data() + static_cast<std::size_t>(r) * img.cols * img.channels);
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

}  // namespace

void write_png16(const fs::path& path, int rows, int cols, int channels,
                 const std::vector<std::uint16_t>& samples) {
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "PNG channel count must be 1 or 3");
  }
  if (samples.size() != static_cast<std::size_t>(rows) * cols * channels) {
    throw Error(ErrorCode::kShapeMismatch, "PNG buffer size");
  }
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    std::fclose(fp);
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "libpng initialization failed");
  }
  std::vector<std::uint16_t> buffer = samples;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::kIo, "PNG write failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 16,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  for (int r = 0; r < rows; ++r) {
    png_write_row(png, reinterpret_cast<png_const_bytep>(
                           buffer.data() + static_cast<std::size_t>(r) * cols * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Grid<double> read_kitti_disparity(const fs::path& path) {
  const PngImage img = read_png16(path);
  if (img.channels != 1) throw Error(ErrorCode::kFormat, "disparity PNG must be grayscale");
  Grid<double> disp(img.rows, img.cols, 0.0);
  for (std::size_t i = 0; i < disp.size(); ++i) {
    disp[i] = img.samples[i] / 256.0;
  }
  return disp;
}

FlowField3 read_kitti_flow(const fs::path& path) {
  const PngImage img = read_png16(path);
  if (img.channels != 3) throw Error(ErrorCode::kFormat, "flow PNG must be RGB");
  FlowField3 flow(img.rows, img.cols);
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    const std::uint16_t* s = img.samples.data() + 3 * i;
    flow.valid[i] = s[2] > 0 ? 1 : 0;
    if (flow.valid[i]) {
      flow.values[i] = Vector3((s[0] - 32768.0) / 64.0, (s[1] - 32768.0) / 64.0, 0.0);
    }
  }
  return flow;
}

nlohmann::json to_json(const SceneSpec& spec) {
  return {
      {"height", spec.height},
      {"width", spec.width},
      {"num_objects", spec.num_objects},
      {"depth_range", {spec.depth_min, spec.depth_max}},
      {"motion_scale", spec.motion_scale},
      {"seed", spec.seed},
      {"intrinsics",
       {{"fx", spec.intrinsics.fx},
        {"fy", spec.intrinsics.fy},
        {"cx", spec.intrinsics.cx},
        {"cy", spec.intrinsics.cy}}},
  };
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  SceneSpec spec;
  try {
    spec.height = j.value("height", spec.height);
    spec.width = j.value("width", spec.width);
    spec.num_objects = j.value("num_objects", spec.num_objects);
    if (j.contains("depth_range")) {
      const auto& range = j.at("depth_range");
      if (!range.is_array() || range.size() != 2) {
        throw Error(ErrorCode::kFormat, "depth_range must be [min, max]");
      }
      spec.depth_min = range[0].get<double>();
      spec.depth_max = range[1].get<double>();
    }
    spec.motion_scale = j.value("motion_scale", spec.motion_scale);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("intrinsics")) {
      const auto& k = j.at("intrinsics");
      spec.intrinsics.fx = k.at("fx").get<double>();
      spec.intrinsics.fy = k.at("fy").get<double>();
      spec.intrinsics.cx = k.at("cx").get<double>();
      spec.intrinsics.cy = k.at("cy").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const MetricReport& report) {
  return {
      {"epe2d_mean", report.epe2d_mean},
      {"epe3d_mean", report.epe3d_mean},
      {"acc_1px", report.acc_1px},
      {"acc3d_05", report.acc3d_05},
      {"acc3d_10", report.acc3d_10},
      {"pixel_count", report.pixel_count},
      {"curves",
       {{"objective", report.objective_curve},
        {"mean_update_norm", report.update_norm_curve},
        {"epe3d", report.epe3d_curve}}},
  };
}

nlohmann::json to_json(const std::vector<IterationDiagnostics>& diagnostics) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : diagnostics) {
    nlohmann::json entry = {
        {"iteration", d.iteration},
        {"objective", d.objective},
        {"mean_update_norm", d.mean_update_norm},
        {"mean_abs_depth_residual", d.mean_abs_depth_residual},
        {"unconstrained", d.unconstrained},
        {"failed", d.failed},
    };
    entry["epe3d"] = std::isfinite(d.epe3d) ? nlohmann::json(d.epe3d) : nlohmann::json(nullptr);
    out.push_back(entry);
  }
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  check_written(out, path);
}

void write_scene(const fs::path& dir, const SyntheticScene& scene) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());

  write_json(dir / "spec.json", to_json(scene.spec));
  write_pfm(dir / "invdepth1.pfm", scene.depth1.values);
  write_pfm(dir / "invdepth2.pfm", scene.depth2.values);
  write_flo(dir / "flow.flo", scene.gt_flow);
  Grid<double> dd(scene.rows(), scene.cols(), 0.0);
  for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = scene.gt_flow.values[i].z();
  write_pfm(dir / "flow_dd.pfm", dd);

  Grid<std::uint8_t> labels(scene.rows(), scene.cols(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint8_t>(scene.labels[i]);
  }
  write_pgm(dir / "labels.pgm", labels);
  Grid<std::uint8_t> occ(scene.rows(), scene.cols(), 0);
  for (std::size_t i = 0; i < occ.size(); ++i) occ[i] = scene.occluded[i] ? 255 : 0;
  write_pgm(dir / "occlusion.pgm", occ);
  write_se3_field(dir / "gt.se3", scene.gt_field);
}

SyntheticScene read_scene(const fs::path& dir) {
  SyntheticScene scene;
  scene.spec = scene_spec_from_json(read_json(dir / "spec.json"));
  scene.depth1 = InverseDepthMap::from_values(read_pfm(dir / "invdepth1.pfm"));
  scene.depth2 = InverseDepthMap::from_values(read_pfm(dir / "invdepth2.pfm"));
  const auto labels = read_pgm(dir / "labels.pgm");
  const auto occ = read_pgm(dir / "occlusion.pgm");
  scene.gt_field = read_se3_field(dir / "gt.se3");

  const int rows = scene.spec.height;
  const int cols = scene.spec.width;
  for (const auto* shape : {&scene.depth1.values, &scene.depth2.values}) {
    if (shape->rows() != rows || shape->cols() != cols) {
      throw Error(ErrorCode::kFormat, "depth map extent disagrees with spec.json");
    }
  }
  if (labels.rows() != rows || labels.cols() != cols || occ.rows() != rows ||
      occ.cols() != cols || scene.gt_field.rows() != rows || scene.gt_field.cols() != cols) {
    throw Error(ErrorCode::kFormat, "scene file extents disagree with spec.json");
  }

  scene.labels = Grid<int>(rows, cols, 0);
  scene.occluded = Mask(rows, cols, 0);
  int max_label = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    scene.labels[i] = labels[i];
    scene.occluded[i] = occ[i] ? 1 : 0;
    max_label = std::max<int>(max_label, labels[i]);
  }
  scene.motions.assign(static_cast<std::size_t>(max_label + 1), Se3Transform::identity());
  std::vector<bool> seen(scene.motions.size(), false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    if (!seen[l]) {
      scene.motions[l] = scene.gt_field.transforms[i];
      seen[l] = true;
    }
  }
  scene.gt_flow = induced_flow(scene.gt_field, scene.depth1, scene.spec.intrinsics);
  return scene;
}

}  // namespace rigidflow::io
