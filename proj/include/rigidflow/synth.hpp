#pragma once

#include <cstdint>
#include <vector>

#include "rigidflow/bilap.hpp"
#include "rigidflow/camera.hpp"
#include "rigidflow/fieldops.hpp"

namespace rigidflow {

struct SceneSpec {
  int height = 96;
  int width = 128;
  // Rigid layers including the background (label 0). 1 means a single rigid scene.
  int num_objects = 2;
  double depth_min = 2.0;
  double depth_max = 8.0;
  // Upper bound on the norm of each layer's motion twist.
  double motion_scale = 0.3;
  std::uint64_t seed = 42;
  PinholeIntrinsics intrinsics{120.0, 120.0, 64.0, 48.0};

  void validate() const;
  bool operator==(const SceneSpec&) const = default;
};

struct SyntheticScene {
  SceneSpec spec;
  InverseDepthMap depth1;
  InverseDepthMap depth2;
  Grid<int> labels;
  std::vector<Se3Transform> motions;  // ground-truth transform per label
  Se3Field gt_field;
  FlowField3 gt_flow;
  Mask occluded;

  int rows() const { return depth1.rows(); }
  int cols() const { return depth1.cols(); }
  int num_labels() const { return static_cast<int>(motions.size()); }
  /// Valid depth, valid flow and not occluded.
  Mask visible_mask() const;
  /// Mean metric depth over valid frame-1 pixels.
  double mean_depth() const;
};

/// Layered planar scene: a slanted background plane plus num_objects - 1
/// elliptical planar patches, each moving rigidly. Frame-2 inverse depth is
/// ray cast against the moved layers with nearest-surface visibility.
SyntheticScene generate(const SceneSpec& spec);

/// Keeps every `factor`-th pixel; intrinsics are rescaled to match.
SyntheticScene downsample(const SyntheticScene& scene, int factor);

/// FNV-1a over the raw bytes of a flow field and its mask.
std::uint64_t checksum(const FlowField3& flow);

enum class ConfidencePolicy { kGtOcclusion, kBlind };

struct OracleConfig {
  double flow_noise_sigma = 0.0;   // pixels, on r_x and r_y
  double depth_noise_sigma = 0.0;  // inverse depth, on r_z
  int embedding_dim = 4;
  double embedding_noise_sigma = 0.0;
  // Minimum distance between per-object anchor embeddings.
  double anchor_gap = 8.0;
  // Smoothing weight on edges inside one object.
  double edge_weight = 10.0;
  ConfidencePolicy confidence_policy = ConfidencePolicy::kGtOcclusion;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground-truth correspondence minus the current projection, plus noise.
RevisionBundle oracle_revisions(const SyntheticScene& scene, const Se3Field& current,
                                const OracleConfig& cfg, int iteration);
EmbeddingField oracle_embeddings(const SyntheticScene& scene, const OracleConfig& cfg,
                                 int iteration = 0);
EdgeWeights oracle_edge_weights(const SyntheticScene& scene, const OracleConfig& cfg);

class SyntheticOracle : public SceneOracle {
 public:
  SyntheticOracle(const SyntheticScene& scene, OracleConfig cfg);

  RevisionBundle revisions(const Se3Field& current, int iteration) override;
  EmbeddingField embeddings(int iteration) override;
  EdgeWeights edge_weights(int iteration) override;

 private:
  const SyntheticScene& scene_;
  OracleConfig cfg_;
};

}  // namespace rigidflow
