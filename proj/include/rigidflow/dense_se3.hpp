#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "rigidflow/camera.hpp"
#include "rigidflow/field.hpp"

namespace rigidflow {

/// H x W grid of C-dimensional rigid-motion embeddings, stored channel-planar
/// as an (H*W) x C matrix so a channel is one contiguous column.
struct EmbeddingField {
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd data;

  EmbeddingField() = default;
  EmbeddingField(int h, int w, int channels)
      : rows(h), cols(w), data(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h) * w, channels)) {}

  int channels() const { return static_cast<int>(data.cols()); }
  Eigen::Index pixel(int r, int c) const { return static_cast<Eigen::Index>(r) * cols + c; }
  auto vector(int r, int c) const { return data.row(pixel(r, c)); }
  auto vector(int r, int c) { return data.row(pixel(r, c)); }
};

/// Revision targets and their per-component confidences.
struct RevisionBundle {
  Grid<Vector3> revision;    // (r_x, r_y, r_z)
  Grid<Vector3> confidence;  // (w_x, w_y, w_z), each in [0, 1]

  RevisionBundle() = default;
  RevisionBundle(int rows, int cols)
      : revision(rows, cols, Vector3::Zero()), confidence(rows, cols, Vector3::Zero()) {}

  int rows() const { return revision.rows(); }
  int cols() const { return revision.cols(); }
};

struct NormalSystem6 {
  Matrix6 H = Matrix6::Zero();
  Vector6 b = Vector6::Zero();
  // Sum over neighbors of a_ij * (w_x + w_y + w_z).
  double total_weight = 0.0;
  // Sum over neighbors of a_ij * ||e_ij||^2_w at the current estimate.
  double energy = 0.0;
  bool constrained = false;
};

/// Square window of the given radius around each pixel, visited every
/// `stride` pixels along both axes with the center always included.
struct Neighborhood {
  int radius = 16;
  int stride = 1;

  void validate() const;
};

struct DampingParams {
  double relative = 1e-6;  // scales diag(H)
  double absolute = 1e-8;  // added to the diagonal
};

enum class PixelStatus : std::uint8_t {
  kOk = 0,
  kUnconstrained = 1,
  kFactorizationFailure = 2,
};

struct PixelIndex {
  int r = 0;
  int c = 0;
};

/// Total accumulated weight below which a pixel counts as unconstrained.
inline constexpr double kMinTotalWeight = 1e-8;

/// 2 * sigmoid(-||vi - vj||^2).
double affinity(const Eigen::Ref<const Eigen::RowVectorXd>& vi,
                const Eigen::Ref<const Eigen::RowVectorXd>& vj);

/// Reprojection residual r_j + pi(T_j X_j) - pi(T_i X_j) at zero update.
/// nullopt if pixel j has no valid depth or either projection fails.
std::optional<Vector3> residual(PixelIndex i, PixelIndex j, const Se3Field& T,
                                const RevisionBundle& rev, const InverseDepthMap& depth1,
                                const PinholeIntrinsics& K);

/// Per-pixel Gauss-Newton systems, accumulated in place over each neighborhood.
Grid<NormalSystem6> build_normal_equations(const Se3Field& T, const EmbeddingField& embeddings,
                                           const RevisionBundle& rev,
                                           const InverseDepthMap& depth1,
                                           const PinholeIntrinsics& K, const Neighborhood& nbhd,
                                           int threads = 1);

struct DampedSolution {
  Twist delta = Twist::Zero();
  PixelStatus status = PixelStatus::kOk;
};

/// delta = (H + relative * diag(H) + absolute * I)^-1 b.
DampedSolution solve_damped(const NormalSystem6& sys, const DampingParams& damping = {});

struct StepResult {
  Se3Field field;
  Grid<PixelStatus> status;
  double objective = 0.0;          // sum of per-pixel energies before the update
  double mean_update_norm = 0.0;   // over pixels that were updated
  int unconstrained = 0;
  int failed = 0;
};

/// One Gauss-Newton update of every pixel: T_i <- exp(delta_i) * T_i.
StepResult dense_se3_step(const Se3Field& T, const EmbeddingField& embeddings,
                          const RevisionBundle& rev, const InverseDepthMap& depth1,
                          const PinholeIntrinsics& K, const Neighborhood& nbhd,
                          const DampingParams& damping = {}, int threads = 1);

struct LinearSolveGradients {
  Eigen::VectorXd grad_b;
  Eigen::MatrixXd grad_H;
};

/// Backward pass of u* = H^-1 b for SPD H: grad_b = H^-1 grad_u and
/// grad_H = -grad_b * u*^T.
LinearSolveGradients linear_solve_adjoint(const Eigen::MatrixXd& H, const Eigen::VectorXd& u_star,
                                          const Eigen::VectorXd& grad_u);

}  // namespace rigidflow
