#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "rigidflow/bilap.hpp"
#include "rigidflow/camera.hpp"
#include "rigidflow/dense_se3.hpp"
#include "rigidflow/field.hpp"

namespace rigidflow {

Grid<Twist> twist_field(const Se3Field& T);
Se3Field exp_field(const Grid<Twist>& twists, int scale = 1);

/// f = pi(T * pi^-1(x)) - x at every pixel with valid depth whose mapped
/// point stays in front of the camera.
FlowField3 induced_flow(const Se3Field& T, const InverseDepthMap& depth1,
                        const PinholeIntrinsics& K);

/// Convex weights over the 3x3 coarse neighborhood of every fine pixel.
/// Index k = (dr + 1) * 3 + (dc + 1) for offsets dr, dc in {-1, 0, 1}.
struct UpsampleWeights {
  int factor = 8;
  Grid<std::array<double, 9>> weights;  // fine resolution

  /// Rejects negative entries or sums that deviate from 1 by more than 1e-6.
  void validate() const;
};

/// Weights that reproduce bilinear interpolation of the coarse grid sampled
/// at fine pixel (R, C) -> coarse coordinates (R / factor, C / factor).
UpsampleWeights bilinear_upsample_weights(int coarse_rows, int coarse_cols, int factor);
/// Weight 1 on the coarse pixel that contains each fine pixel.
UpsampleWeights nearest_upsample_weights(int coarse_rows, int coarse_cols, int factor);

/// exp(sum_k w_k * log(T_k)) over each 3x3 coarse neighborhood; neighbors
/// outside the coarse grid are clamped to the border.
Se3Field upsample_se3(const Se3Field& coarse, const UpsampleWeights& weights);

/// Keeps every `factor`-th pixel.
Se3Field downsample_nearest(const Se3Field& fine, int factor);

/// Supplies the per-iteration inputs that a trained update operator would
/// predict: revisions on top of the current field, embeddings, and edge weights.
class SceneOracle {
 public:
  virtual ~SceneOracle() = default;
  virtual RevisionBundle revisions(const Se3Field& current, int iteration) = 0;
  virtual EmbeddingField embeddings(int iteration) = 0;
  virtual EdgeWeights edge_weights(int iteration) = 0;
};

struct SolverOptions {
  int iterations = 16;
  Neighborhood neighborhood{};
  DampingParams damping{};
  bool smoothing = false;
  int threads = 1;
  bool keep_history = false;
};

struct IterationDiagnostics {
  int iteration = 0;
  double objective = 0.0;
  double mean_update_norm = 0.0;
  double mean_abs_depth_residual = 0.0;
  double epe3d = 0.0;  // NaN when no evaluator was supplied
  int unconstrained = 0;
  int failed = 0;
};

struct SolveResult {
  Se3Field field;
  std::vector<IterationDiagnostics> diagnostics;
  std::vector<Se3Field> history;  // one entry per iteration when requested
};

using FieldEvaluator = std::function<double(const Se3Field&)>;

/// Starts from the identity field and alternates oracle queries, optional
/// embedding smoothing, and one Dense-SE3 Gauss-Newton step per iteration.
SolveResult solve_scene(const InverseDepthMap& depth1, const InverseDepthMap& depth2,
                        const PinholeIntrinsics& K, SceneOracle& oracle,
                        const SolverOptions& options, const FieldEvaluator& evaluator = {});

struct LossParams {
  double gamma = 0.9;
  double revision_loss_weight = 0.2;
  bool include_revision_loss = false;

  void validate() const;
};

/// Mean over valid pixels of ||f_a - f_b||_1 (all three components).
double flow_l1(const FlowField3& a, const FlowField3& b);

/// sum_k gamma^(N-k) * L1(induced_flow(T_k), gt). When the revision term is
/// enabled, `revised_flows[k]` (the flow implied by the k-th revisions) adds
/// revision_loss_weight * sum_k gamma^(N-k) * L1(revised_flows[k], gt).
double sequence_loss(std::span<const Se3Field> preds, const FlowField3& gt,
                     const InverseDepthMap& depth1, const PinholeIntrinsics& K,
                     const LossParams& params = {},
                     std::span<const FlowField3> revised_flows = {});

}  // namespace rigidflow
