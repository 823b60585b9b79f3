#include "rigidflow/dense_se3.hpp"

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "rigidflow/parallel.hpp"

namespace rigidflow {

void Neighborhood::validate() const {
  if (radius < 1) {
    throw Error(ErrorCode::kInvalidArgument, "neighborhood radius must be >= 1");
  }
  if (stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "neighborhood stride must be >= 1");
  }
}

double affinity(const Eigen::Ref<const Eigen::RowVectorXd>& vi,
                const Eigen::Ref<const Eigen::RowVectorXd>& vj) {
  if (vi.size() != vj.size()) {
    throw Error(ErrorCode::kShapeMismatch, "embedding dimensions differ");
  }
  return 2.0 / (1.0 + std::exp((vi - vj).squaredNorm()));
}

std::optional<Vector3> residual(PixelIndex i, PixelIndex j, const Se3Field& T,
                                const RevisionBundle& rev, const InverseDepthMap& depth1,
                                const PinholeIntrinsics& K) {
  if (!depth1.is_valid(j.r, j.c)) {
    return std::nullopt;
  }
  const auto X = try_backproject(pixel_at(depth1, j.r, j.c), K);
  if (!X) {
    return std::nullopt;
  }
  const auto target = try_project(T(j.r, j.c).act(*X), K);
  const auto current = try_project(T(i.r, i.c).act(*X), K);
  if (!target || !current) {
    return std::nullopt;
  }
  return rev.revision(j.r, j.c) + target->vector() - current->vector();
}

namespace {

void check_shapes(const Se3Field& T, const EmbeddingField& embeddings, const RevisionBundle& rev,
                  const InverseDepthMap& depth1) {
  require_same_shape(T.transforms, rev.revision, "transform field vs revisions");
  require_same_shape(rev.revision, rev.confidence, "revisions vs confidences");
  require_same_shape(T.transforms, depth1.values, "transform field vs inverse depth");
  if (embeddings.rows != T.rows() || embeddings.cols != T.cols() ||
      embeddings.data.rows() != static_cast<Eigen::Index>(T.rows()) * T.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "embedding field vs transform field");
  }
}

// Per-neighbor quantities that do not depend on the center pixel. Sized by
// the image, never by the neighborhood.
struct NeighborTerms {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<Vector3> point;
  std::vector<Vector3> target;
  std::vector<Vector3> weight;
  std::vector<std::uint8_t> active;
  std::vector<double> embedding;  // pixel-major copy

  NeighborTerms(const Se3Field& T, const EmbeddingField& embeddings, const RevisionBundle& rev,
                const InverseDepthMap& depth1, const PinholeIntrinsics& K)
      : rows(T.rows()), cols(T.cols()), channels(embeddings.channels()) {
    const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    point.assign(n, Vector3::Zero());
    target.assign(n, Vector3::Zero());
    weight.assign(n, Vector3::Zero());
    active.assign(n, 0);
    embedding.resize(n * static_cast<std::size_t>(channels));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const std::size_t j = depth1.values.index(r, c);
        for (int k = 0; k < channels; ++k) {
          embedding[j * static_cast<std::size_t>(channels) + static_cast<std::size_t>(k)] =
              embeddings.data(static_cast<Eigen::Index>(j), k);
        }
        const Vector3& w = rev.confidence(r, c);
        if (!depth1.is_valid(r, c) || w.isZero(0.0)) {
          continue;
        }
        const auto X = try_backproject(pixel_at(depth1, r, c), K);
        if (!X) continue;
        const auto projected = try_project(T(r, c).act(*X), K);
        if (!projected) continue;
        point[j] = *X;
        target[j] = rev.revision(r, c) + projected->vector();
        weight[j] = w;
        active[j] = 1;
      }
    }
  }
};

// H += w * row^T row and b += w * e * row over the columns `cols` in which
// the row can be nonzero. Only the upper triangle of H is written.
template <std::size_t N>
inline void add_row(std::array<double, 36>& H, std::array<double, 6>& b,
                    const std::array<double, 6>& row, const std::array<std::size_t, N>& cols,
                    double w, double e) {
  if (w == 0.0) return;
  for (std::size_t p = 0; p < N; ++p) {
    const std::size_t i = cols[p];
    const double wp = w * row[i];
    b[i] += wp * e;
    for (std::size_t q = p; q < N; ++q) H[i * 6 + cols[q]] += wp * row[cols[q]];
  }
}

constexpr std::array<std::size_t, 5> kColsX{0, 2, 3, 4, 5};
constexpr std::array<std::size_t, 5> kColsY{1, 2, 3, 4, 5};
constexpr std::array<std::size_t, 3> kColsD{2, 3, 4};

NormalSystem6 accumulate_pixel(int r, int c, const Se3Transform& Ti, const NeighborTerms& terms,
                               const PinholeIntrinsics& K, const Neighborhood& nbhd) {
  NormalSystem6 sys;
  std::array<double, 36> H{};
  std::array<double, 6> b{};
  const Matrix3 R = Ti.rotation_matrix();
  const Vector3& t = Ti.translation();
  const std::size_t channels = static_cast<std::size_t>(terms.channels);
  const double* vi = terms.embedding.data() + static_cast<std::size_t>(r * terms.cols + c) * channels;

  const int steps = nbhd.radius / nbhd.stride;
  for (int m = -steps; m <= steps; ++m) {
    const int rr = r + m * nbhd.stride;
    if (rr < 0 || rr >= terms.rows) continue;
    for (int n = -steps; n <= steps; ++n) {
      const int cc = c + n * nbhd.stride;
      if (cc < 0 || cc >= terms.cols) continue;
      const std::size_t j = static_cast<std::size_t>(rr * terms.cols + cc);
      if (!terms.active[j]) continue;

      const double* vj = terms.embedding.data() + j * channels;
      double dist2 = 0.0;
      for (std::size_t k = 0; k < channels; ++k) {
        const double diff = vi[k] - vj[k];
        dist2 += diff * diff;
      }
      const double a = 2.0 / (1.0 + std::exp(dist2));
      if (a == 0.0) continue;

      const Vector3 P = R * terms.point[j] + t;
      if (!(P.z() > kMinDepth)) continue;
      const double d = 1.0 / P.z();
      const double d2 = d * d;
      const Vector3 projected(K.fx * P.x() * d + K.cx, K.fy * P.y() * d + K.cy, d);
      const Vector3 e = terms.target[j] - projected;

      // Rows of J_pi * (I | -hat(P)), written out so that only the nonzero
      // entries are touched.
      const double X = P.x();
      const double Y = P.y();
      const double fxd = K.fx * d;
      const double fyd = K.fy * d;
      const std::array<double, 6> jx{fxd, 0.0, -fxd * X * d, -fxd * X * Y * d,
                                     fxd * (P.z() + X * X * d), -fxd * Y};
      const std::array<double, 6> jy{0.0, fyd, -fyd * Y * d, -fyd * (P.z() + Y * Y * d),
                                     fyd * X * Y * d, fyd * X};
      const std::array<double, 6> jd{0.0, 0.0, -d2, -Y * d2, X * d2, 0.0};

      const Vector3 aw = a * terms.weight[j];
      add_row(H, b, jx, kColsX, aw.x(), e.x());
      add_row(H, b, jy, kColsY, aw.y(), e.y());
      add_row(H, b, jd, kColsD, aw.z(), e.z());
      sys.total_weight += aw.sum();
      sys.energy += e.dot(aw.cwiseProduct(e));
    }
  }

  for (int p = 0; p < 6; ++p) {
    sys.b(p) = b[static_cast<std::size_t>(p)];
    for (int q = p; q < 6; ++q) {
      sys.H(p, q) = H[static_cast<std::size_t>(p * 6 + q)];
      sys.H(q, p) = sys.H(p, q);
    }
  }
  sys.constrained = sys.total_weight >= kMinTotalWeight;
  if (!sys.constrained) {
    sys.H.setZero();
    sys.b.setZero();
  }
  return sys;
}

}  // namespace

Grid<NormalSystem6> build_normal_equations(const Se3Field& T, const EmbeddingField& embeddings,
                                           const RevisionBundle& rev,
                                           const InverseDepthMap& depth1,
                                           const PinholeIntrinsics& K, const Neighborhood& nbhd,
                                           int threads) {
  check_shapes(T, embeddings, rev, depth1);
  nbhd.validate();
  const NeighborTerms terms(T, embeddings, rev, depth1, K);
  Grid<NormalSystem6> systems(T.rows(), T.cols());
  parallel_rows(T.rows(), threads, [&](int r) {
    for (int c = 0; c < T.cols(); ++c) {
      systems(r, c) = accumulate_pixel(r, c, T(r, c), terms, K, nbhd);
    }
  });
  return systems;
}

DampedSolution solve_damped(const NormalSystem6& sys, const DampingParams& damping) {
  DampedSolution out;
  if (!sys.constrained) {
    out.status = PixelStatus::kUnconstrained;
    return out;
  }
  if (sys.b.isZero(0.0)) {
    return out;
  }
  Matrix6 A = sys.H;
  A.diagonal() += damping.relative * sys.H.diagonal() + Vector6::Constant(damping.absolute);
  const Eigen::LLT<Matrix6> llt(A);
  if (llt.info() != Eigen::Success) {
    out.status = PixelStatus::kFactorizationFailure;
    return out;
  }
  const Twist delta = llt.solve(sys.b);
  if (!delta.allFinite()) {
    out.status = PixelStatus::kFactorizationFailure;
    return out;
  }
  out.delta = delta;
  return out;
}

StepResult dense_se3_step(const Se3Field& T, const EmbeddingField& embeddings,
                          const RevisionBundle& rev, const InverseDepthMap& depth1,
                          const PinholeIntrinsics& K, const Neighborhood& nbhd,
                          const DampingParams& damping, int threads) {
  check_shapes(T, embeddings, rev, depth1);
  nbhd.validate();
  const NeighborTerms terms(T, embeddings, rev, depth1, K);

  StepResult result;
  result.field = T;
  result.status = Grid<PixelStatus>(T.rows(), T.cols(), PixelStatus::kOk);
  Grid<double> energy(T.rows(), T.cols(), 0.0);
  Grid<double> update_norm(T.rows(), T.cols(), 0.0);

  parallel_rows(T.rows(), threads, [&](int r) {
    for (int c = 0; c < T.cols(); ++c) {
      const NormalSystem6 sys = accumulate_pixel(r, c, T(r, c), terms, K, nbhd);
      const DampedSolution sol = solve_damped(sys, damping);
      energy(r, c) = sys.energy;
      result.status(r, c) = sol.status;
      if (sol.status == PixelStatus::kOk) {
        result.field(r, c) = retract(sol.delta, T(r, c));
        update_norm(r, c) = sol.delta.norm();
      }
    }
  });

  double norm_sum = 0.0;
  int updated = 0;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    result.objective += energy[i];
    switch (result.status[i]) {
      case PixelStatus::kOk:
        norm_sum += update_norm[i];
        ++updated;
        break;
      case PixelStatus::kUnconstrained:
        ++result.unconstrained;
        break;
      case PixelStatus::kFactorizationFailure:
        ++result.failed;
        break;
    }
  }
  result.mean_update_norm = updated > 0 ? norm_sum / updated : 0.0;
  return result;
}

LinearSolveGradients linear_solve_adjoint(const Eigen::MatrixXd& H, const Eigen::VectorXd& u_star,
                                          const Eigen::VectorXd& grad_u) {
  if (H.rows() != H.cols() || H.rows() != u_star.size() || H.rows() != grad_u.size()) {
    throw Error(ErrorCode::kShapeMismatch, "linear_solve_adjoint operand sizes");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kFactorizationFailure, "H is not positive definite");
  }
  LinearSolveGradients g;
  g.grad_b = llt.solve(grad_u);
  g.grad_H = -g.grad_b * u_star.transpose();
  return g;
}

}  // namespace rigidflow
