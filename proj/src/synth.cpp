#include "rigidflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "rigidflow/fieldops.hpp"
#include "rigidflow/random.hpp"

namespace rigidflow {

namespace {

enum Stream : std::uint64_t {
  kLayerStream = 1,
  kFlowNoiseStream = 2,
  kDepthNoiseStream = 3,
  kEmbeddingNoiseStream = 4,
};

constexpr int kMaxAttempts = 10;
constexpr int kMinObjectPixels = 16;

struct Layer {
  // Plane n . X = 1 in frame-1 camera coordinates; inverse depth along the
  // ray (u, v, 1) is n . (u, v, 1).
  Vector3 plane = Vector3::Zero();
  bool background = false;
  double center_x = 0.0;
  double center_y = 0.0;
  double axis_a = 1.0;
  double axis_b = 1.0;
  double angle = 0.0;
  Se3Transform motion;
  Matrix4 motion_matrix = Matrix4::Identity();

  bool supports(double x, double y) const {
    if (background) return true;
    const double dx = x - center_x;
    const double dy = y - center_y;
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    const double p = (dx * cs + dy * sn) / axis_a;
    const double q = (-dx * sn + dy * cs) / axis_b;
    return p * p + q * q <= 1.0;
  }
};

Vector3 ray(const PinholeIntrinsics& K, double x, double y) {
  return {(x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0};
}

Vector3 unit_direction(const CounterRng& rng, std::uint64_t index, std::uint64_t draw) {
  Vector3 v(rng.normal(kLayerStream, index, draw), rng.normal(kLayerStream, index, draw + 1),
            rng.normal(kLayerStream, index, draw + 2));
  return v.normalized();
}

Twist sample_motion(const SceneSpec& spec, const CounterRng& rng, std::uint64_t index) {
  if (spec.motion_scale == 0.0) return Twist::Zero();
  const double magnitude = spec.motion_scale * rng.uniform(kLayerStream, index, 20, 0.5, 1.0);
  const double split = rng.uniform(kLayerStream, index, 21, 0.0, 0.5);
  return make_twist(magnitude * std::cos(split) * unit_direction(rng, index, 22),
                    magnitude * std::sin(split) * unit_direction(rng, index, 25));
}

std::vector<Layer> sample_layers(const SceneSpec& spec, int attempt) {
  const CounterRng rng(spec.seed);
  const auto& K = spec.intrinsics;
  const double W = spec.width;
  const double H = spec.height;
  std::vector<Layer> layers(static_cast<std::size_t>(spec.num_objects));

  auto key = [&](int layer) {
    return static_cast<std::uint64_t>(attempt) * 1024 + static_cast<std::uint64_t>(layer);
  };

  Layer& bg = layers[0];
  bg.background = true;
  {
    const std::uint64_t k = key(0);
    const double z0 = rng.uniform(kLayerStream, k, 0, 0.8, 1.0) * spec.depth_max;
    const double d0 = 1.0 / z0;
    bg.plane = Vector3(rng.uniform(kLayerStream, k, 1, -0.15, 0.15) * d0,
                       rng.uniform(kLayerStream, k, 2, -0.15, 0.15) * d0, d0);
  }

  const double near_far = spec.depth_min + 0.5 * (spec.depth_max - spec.depth_min);
  for (int l = 1; l < spec.num_objects; ++l) {
    Layer& layer = layers[static_cast<std::size_t>(l)];
    const std::uint64_t k = key(l);
    layer.center_x = rng.uniform(kLayerStream, k, 0, 0.15 * W, 0.85 * W);
    layer.center_y = rng.uniform(kLayerStream, k, 1, 0.15 * H, 0.85 * H);
    const double extent = std::min(W, H);
    layer.axis_a = rng.uniform(kLayerStream, k, 2, 0.12, 0.28) * extent;
    layer.axis_b = rng.uniform(kLayerStream, k, 3, 0.12, 0.28) * extent;
    layer.angle = rng.uniform(kLayerStream, k, 4, 0.0, std::numbers::pi);
    const double z0 = rng.uniform(kLayerStream, k, 5, spec.depth_min, near_far);
    const double d0 = 1.0 / z0;
    const double sx = rng.uniform(kLayerStream, k, 6, -0.1, 0.1) * d0;
    const double sy = rng.uniform(kLayerStream, k, 7, -0.1, 0.1) * d0;
    const Vector3 c = ray(K, layer.center_x, layer.center_y);
    layer.plane = Vector3(sx, sy, d0 - sx * c.x() - sy * c.y());
  }

  for (int l = 0; l < spec.num_objects; ++l) {
    Layer& layer = layers[static_cast<std::size_t>(l)];
    layer.motion = exp(sample_motion(spec, rng, key(l)));
    layer.motion_matrix = layer.motion.matrix();
  }
  return layers;
}

struct Frame {
  Grid<double> inv_depth;
  Grid<int> labels;
};

Frame render_frame1(const SceneSpec& spec, const std::vector<Layer>& layers) {
  Frame f{Grid<double>(spec.height, spec.width, 0.0), Grid<int>(spec.height, spec.width, -1)};
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Vector3 u = ray(spec.intrinsics, c, r);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].supports(c, r)) continue;
        const double d = layers[l].plane.dot(u);
        if (d > 0.0 && d > f.inv_depth(r, c)) {
          f.inv_depth(r, c) = d;
          f.labels(r, c) = static_cast<int>(l);
        }
      }
    }
  }
  return f;
}

// Casts the ray of every frame-2 pixel against each moved layer; the nearest
// hit whose pre-image lies inside the layer's frame-1 support wins.
Frame render_frame2(const SceneSpec& spec, const std::vector<Layer>& layers) {
  const auto& K = spec.intrinsics;
  Frame f{Grid<double>(spec.height, spec.width, 0.0), Grid<int>(spec.height, spec.width, -1)};
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Vector3 u = ray(K, c, r);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        const Matrix3 R = layer.motion_matrix.topLeftCorner<3, 3>();
        const Vector3 t = layer.motion_matrix.topRightCorner<3, 1>();
        const Vector3 m = R * layer.plane;
        const double denom = m.dot(u);
        if (denom == 0.0) continue;
        const double s = (1.0 + m.dot(t)) / denom;
        if (!(s > kMinDepth)) continue;
        const Vector3 X = R.transpose() * (s * u - t);
        if (!(X.z() > kMinDepth)) continue;
        const double x1 = K.fx * X.x() / X.z() + K.cx;
        const double y1 = K.fy * X.y() / X.z() + K.cy;
        if (!layer.supports(x1, y1)) continue;
        const double d = 1.0 / s;
        if (d > f.inv_depth(r, c)) {
          f.inv_depth(r, c) = d;
          f.labels(r, c) = static_cast<int>(l);
        }
      }
    }
  }
  return f;
}

// Ground-truth flow written out with explicit matrices, independent of the
// quaternion path used by induced_flow.
FlowField3 direct_flow(const PinholeIntrinsics& K, const InverseDepthMap& depth1,
                       const Grid<int>& labels, const std::vector<Matrix4>& motion) {
  FlowField3 flow(depth1.rows(), depth1.cols());
  for (int r = 0; r < depth1.rows(); ++r) {
    for (int c = 0; c < depth1.cols(); ++c) {
      if (!depth1.is_valid(r, c)) continue;
      // Homogeneous point scaled by inverse depth: (xn, yn, 1, d).
      const double d = depth1.values(r, c);
      const double xn = (c - K.cx) / K.fx;
      const double yn = (r - K.cy) / K.fy;
      const Eigen::Vector4d P = motion[static_cast<std::size_t>(labels(r, c))] * Eigen::Vector4d(xn, yn, 1.0, d);
      if (!(P.z() > kMinDepth * d)) continue;
      flow.values(r, c) = Vector3(K.fx * (P.x() / P.z() - xn), K.fy * (P.y() / P.z() - yn), d / P.z() - d);
      flow.valid(r, c) = 1;
    }
  }
  return flow;
}

Mask occlusion_mask(const FlowField3& flow, const Grid<int>& labels, const Frame& frame2) {
  const int rows = labels.rows();
  const int cols = labels.cols();
  Mask occluded(rows, cols, 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!flow.valid(r, c)) continue;
      double x = c + flow.values(r, c).x();
      double y = r + flow.values(r, c).y();
      x = (x < 0.0 && x > -1e-9) ? 0.0 : (x > cols - 1 && x < cols - 1 + 1e-9) ? cols - 1 : x;
      y = (y < 0.0 && y > -1e-9) ? 0.0 : (y > rows - 1 && y < rows - 1 + 1e-9) ? rows - 1 : y;
      if (!(x >= 0.0 && y >= 0.0 && x <= cols - 1 && y <= rows - 1)) continue;
      const int c0 = static_cast<int>(std::floor(x));
      const int r0 = static_cast<int>(std::floor(y));
      const int c1 = x > c0 ? c0 + 1 : c0;
      const int r1 = y > r0 ? r0 + 1 : r0;
      const int label = labels(r, c);
      bool visible = true;
      for (int rr : {r0, r1}) {
        for (int cc : {c0, c1}) {
          visible = visible && frame2.labels(rr, cc) == label;
        }
      }
      occluded(r, c) = visible ? 0 : 1;
    }
  }
  return occluded;
}

}  // namespace

void SceneSpec::validate() const {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "scene extent must be positive");
  }
  if (num_objects < 1) {
    throw Error(ErrorCode::kInvalidArgument, "num_objects must be >= 1");
  }
  if (!(depth_min > 0.0) || !(depth_max > depth_min)) {
    throw Error(ErrorCode::kInvalidArgument, "depth range must satisfy 0 < min < max");
  }
  if (!(motion_scale >= 0.0) || !std::isfinite(motion_scale)) {
    throw Error(ErrorCode::kInvalidArgument, "motion_scale must be >= 0");
  }
  intrinsics.validate();
}

Mask SyntheticScene::visible_mask() const {
  Mask m(rows(), cols(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = (depth1.valid[i] && gt_flow.valid[i] && !occluded[i]) ? 1 : 0;
  }
  return m;
}

double SyntheticScene::mean_depth() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < depth1.values.size(); ++i) {
    if (!depth1.valid[i]) continue;
    sum += 1.0 / depth1.values[i];
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

SyntheticScene generate(const SceneSpec& spec) {
  spec.validate();
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::vector<Layer> layers = sample_layers(spec, attempt);
    Frame frame1 = render_frame1(spec, layers);

    std::vector<int> counts(layers.size(), 0);
    bool covered = true;
    for (int label : frame1.labels.values()) {
      if (label < 0) {
        covered = false;
        break;
      }
      ++counts[static_cast<std::size_t>(label)];
    }
    if (!covered || *std::min_element(counts.begin(), counts.end()) < kMinObjectPixels) {
      continue;
    }

    SyntheticScene scene;
    scene.spec = spec;
    scene.depth1 = InverseDepthMap::from_values(std::move(frame1.inv_depth));
    scene.labels = std::move(frame1.labels);

    std::vector<Matrix4> matrices;
    for (const Layer& layer : layers) {
      scene.motions.push_back(layer.motion);
      matrices.push_back(layer.motion_matrix);
    }
    scene.gt_field = Se3Field(spec.height, spec.width);
    for (std::size_t i = 0; i < scene.labels.size(); ++i) {
      scene.gt_field.transforms[i] = scene.motions[static_cast<std::size_t>(scene.labels[i])];
    }
    // Stored flow goes through the same path as any predicted field, so the
    // ground-truth field reproduces it exactly; visibility uses the matrix path.
    scene.gt_flow = induced_flow(scene.gt_field, scene.depth1, spec.intrinsics);
    const FlowField3 moved = direct_flow(spec.intrinsics, scene.depth1, scene.labels, matrices);

    Frame frame2 = render_frame2(spec, layers);
    scene.occluded = occlusion_mask(moved, scene.labels, frame2);
    scene.depth2 = InverseDepthMap::from_values(std::move(frame2.inv_depth));
    return scene;
  }
  throw Error(ErrorCode::kDegenerateScene,
              "no layout with every object covering >= 16 pixels after 10 attempts");
}

SyntheticScene downsample(const SyntheticScene& scene, int factor) {
  if (factor < 1) {
    throw Error(ErrorCode::kInvalidArgument, "downsampling factor must be >= 1");
  }
  if (factor == 1) return scene;
  const int rows = (scene.rows() + factor - 1) / factor;
  const int cols = (scene.cols() + factor - 1) / factor;

  SyntheticScene out;
  out.spec = scene.spec;
  out.spec.height = rows;
  out.spec.width = cols;
  out.spec.intrinsics = scene.spec.intrinsics.subsampled(factor);
  out.motions = scene.motions;

  Grid<double> d1(rows, cols, 0.0);
  Grid<double> d2(rows, cols, 0.0);
  out.labels = Grid<int>(rows, cols, 0);
  out.occluded = Mask(rows, cols, 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int R = r * factor;
      const int C = c * factor;
      d1(r, c) = scene.depth1.is_valid(R, C) ? scene.depth1.values(R, C) : 0.0;
      d2(r, c) = scene.depth2.is_valid(R, C) ? scene.depth2.values(R, C) : 0.0;
      out.labels(r, c) = scene.labels(R, C);
      out.occluded(r, c) = scene.occluded(R, C);
    }
  }
  out.depth1 = InverseDepthMap::from_values(std::move(d1));
  out.depth2 = InverseDepthMap::from_values(std::move(d2));
  out.gt_field = downsample_nearest(scene.gt_field, factor);
  out.gt_field.scale = scene.gt_field.scale * factor;

  std::vector<Matrix4> matrices;
  for (const auto& m : out.motions) matrices.push_back(m.matrix());
  out.gt_flow = direct_flow(out.spec.intrinsics, out.depth1, out.labels, matrices);
  return out;
}

std::uint64_t checksum(const FlowField3& flow) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < flow.values.size(); ++i) {
    double v[3] = {flow.values[i].x(), flow.values[i].y(), flow.values[i].z()};
    feed(v, sizeof(v));
    feed(&flow.valid[i], 1);
  }
  return h;
}

void OracleConfig::validate() const {
  if (!(flow_noise_sigma >= 0.0) || !(depth_noise_sigma >= 0.0) ||
      !(embedding_noise_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigmas must be >= 0");
  }
  if (embedding_dim < 2) {
    throw Error(ErrorCode::kInvalidArgument, "embedding_dim must be >= 2");
  }
  if (!(anchor_gap > 0.0) || !(edge_weight >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "anchor_gap must be > 0 and edge_weight >= 0");
  }
}

RevisionBundle oracle_revisions(const SyntheticScene& scene, const Se3Field& current,
                                const OracleConfig& cfg, int iteration) {
  cfg.validate();
  require_same_shape(current.transforms, scene.depth1.values, "current field vs scene");
  const CounterRng rng(cfg.seed);
  const auto& K = scene.spec.intrinsics;
  const int rows = scene.rows();
  const int cols = scene.cols();
  RevisionBundle rev(rows, cols);
  const auto it = static_cast<std::uint64_t>(iteration);

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!scene.depth1.is_valid(r, c) || !scene.gt_flow.valid(r, c)) continue;
      const AugmentedPixel p = pixel_at(scene.depth1, r, c);
      const auto projected = try_map_pixel(p, current(r, c), K);
      if (!projected) continue;
      const std::uint64_t index = scene.depth1.values.index(r, c);
      Vector3 noise(cfg.flow_noise_sigma * rng.normal(kFlowNoiseStream, index, 2 * it),
                    cfg.flow_noise_sigma * rng.normal(kFlowNoiseStream, index, 2 * it + 1),
                    cfg.depth_noise_sigma * rng.normal(kDepthNoiseStream, index, it));
      const Vector3 target = p.vector() + scene.gt_flow.values(r, c);
      rev.revision(r, c) = target - projected->vector() + noise;
      const bool trusted =
          cfg.confidence_policy == ConfidencePolicy::kBlind || !scene.occluded(r, c);
      rev.confidence(r, c) = trusted ? Vector3::Ones() : Vector3::Zero();
    }
  }
  return rev;
}

EmbeddingField oracle_embeddings(const SyntheticScene& scene, const OracleConfig& cfg,
                                 int iteration) {
  cfg.validate();
  const int dims = cfg.embedding_dim;
  const int labels = std::max(1, scene.num_labels());
  // Anchors sit on an integer lattice scaled by anchor_gap, one lattice point
  // per label, so distinct anchors are at least anchor_gap apart.
  int base = 1;
  while (std::pow(static_cast<double>(base), dims) < labels) ++base;
  Eigen::MatrixXd anchors = Eigen::MatrixXd::Zero(labels, dims);
  for (int l = 0; l < labels; ++l) {
    int code = l;
    for (int k = 0; k < dims; ++k) {
      anchors(l, k) = cfg.anchor_gap * (code % std::max(base, 2));
      code /= std::max(base, 2);
    }
  }

  const CounterRng rng(cfg.seed);
  EmbeddingField emb(scene.rows(), scene.cols(), dims);
  for (int r = 0; r < scene.rows(); ++r) {
    for (int c = 0; c < scene.cols(); ++c) {
      const Eigen::Index i = emb.pixel(r, c);
      const int label = std::max(0, scene.labels(r, c));
      for (int k = 0; k < dims; ++k) {
        double v = anchors(label, k);
        if (cfg.embedding_noise_sigma > 0.0) {
          v += cfg.embedding_noise_sigma *
               rng.normal(kEmbeddingNoiseStream, static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(iteration) * static_cast<std::uint64_t>(dims) +
                              static_cast<std::uint64_t>(k));
        }
        emb.data(i, k) = v;
      }
    }
  }
  return emb;
}

EdgeWeights oracle_edge_weights(const SyntheticScene& scene, const OracleConfig& cfg) {
  cfg.validate();
  const int rows = scene.rows();
  const int cols = scene.cols();
  EdgeWeights w(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols && scene.labels(r, c) == scene.labels(r, c + 1)) {
        w.wx(r, c) = cfg.edge_weight;
      }
      if (r + 1 < rows && scene.labels(r, c) == scene.labels(r + 1, c)) {
        w.wy(r, c) = cfg.edge_weight;
      }
    }
  }
  return w;
}

SyntheticOracle::SyntheticOracle(const SyntheticScene& scene, OracleConfig cfg)
    : scene_(scene), cfg_(cfg) {
  cfg_.validate();
}

RevisionBundle SyntheticOracle::revisions(const Se3Field& current, int iteration) {
  return oracle_revisions(scene_, current, cfg_, iteration);
}

EmbeddingField SyntheticOracle::embeddings(int iteration) {
  return oracle_embeddings(scene_, cfg_, iteration);
}

EdgeWeights SyntheticOracle::edge_weights(int) { return oracle_edge_weights(scene_, cfg_); }

}  // namespace rigidflow
