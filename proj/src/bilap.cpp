#include "rigidflow/bilap.hpp"

#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>

namespace rigidflow {

namespace {

using Triplet = Eigen::Triplet<double>;

void check_weights(const EdgeWeights& w) {
  require_same_shape(w.wx, w.wy, "edge weights");
  for (const auto* grid : {&w.wx, &w.wy}) {
    for (double value : grid->values()) {
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kInvalidArgument, "edge weight is not finite");
      }
      if (value < 0.0) {
        throw Error(ErrorCode::kNegativeWeight, "edge weight " + std::to_string(value));
      }
    }
  }
}

void check_field(const EmbeddingField& f, int rows, int cols, const char* what) {
  if (f.rows != rows || f.cols != cols ||
      f.data.rows() != static_cast<Eigen::Index>(rows) * cols) {
    throw Error(ErrorCode::kShapeMismatch, what);
  }
}

}  // namespace

SparseMatrix difference_x(int rows, int cols) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int i = r * cols + c;
      t.emplace_back(i, i, -1.0);
      t.emplace_back(i, i + 1, 1.0);
    }
  }
  SparseMatrix D(rows * cols, rows * cols);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

SparseMatrix difference_y(int rows, int cols) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * rows * cols));
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      t.emplace_back(i, i, -1.0);
      t.emplace_back(i, i + cols, 1.0);
    }
  }
  SparseMatrix D(rows * cols, rows * cols);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

BilapSystem build_system(const EdgeWeights& w) {
  check_weights(w);
  const int rows = w.rows();
  const int cols = w.cols();
  // Each weighted edge (i, k) adds w * [[1, -1], [-1, 1]] to A.
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(rows * cols) * 9);
  for (int i = 0; i < rows * cols; ++i) {
    t.emplace_back(i, i, 1.0);
  }
  auto add_edge = [&](int i, int k, double weight) {
    if (weight == 0.0) return;
    t.emplace_back(i, i, weight);
    t.emplace_back(k, k, weight);
    t.emplace_back(i, k, -weight);
    t.emplace_back(k, i, -weight);
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) add_edge(i, i + 1, w.wx(r, c));
      if (r + 1 < rows) add_edge(i, i + cols, w.wy(r, c));
    }
  }
  BilapSystem sys;
  sys.rows = rows;
  sys.cols = cols;
  sys.A.resize(rows * cols, rows * cols);
  sys.A.setFromTriplets(t.begin(), t.end());
  sys.A.makeCompressed();
  return sys;
}

struct BilapFactorization::Impl {
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

BilapFactorization::BilapFactorization(int rows, int cols, std::unique_ptr<Impl> impl)
    : rows_(rows), cols_(cols), impl_(std::move(impl)) {}

BilapFactorization::~BilapFactorization() = default;

Eigen::MatrixXd BilapFactorization::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != static_cast<Eigen::Index>(rows_) * cols_) {
    throw Error(ErrorCode::kShapeMismatch, "right-hand side size");
  }
  return impl_->llt.solve(rhs);
}

Eigen::VectorXd BilapFactorization::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != static_cast<Eigen::Index>(rows_) * cols_) {
    throw Error(ErrorCode::kShapeMismatch, "right-hand side size");
  }
  return impl_->llt.solve(rhs);
}

BilapFactorizationPtr factorize(const BilapSystem& sys) {
  auto impl = std::make_unique<BilapFactorization::Impl>();
  impl->llt.compute(sys.A);
  if (impl->llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite, "bi-Laplacian system failed to factorize");
  }
  return BilapFactorizationPtr(new BilapFactorization(sys.rows, sys.cols, std::move(impl)));
}

EmbeddingField smooth(const EmbeddingField& v, const BilapFactorization& factor) {
  check_field(v, factor.rows(), factor.cols(), "embedding field vs system");
  EmbeddingField u(v.rows, v.cols, v.channels());
  u.data = factor.solve(v.data);
  return u;
}

EmbeddingField smooth(const EmbeddingField& v, const EdgeWeights& w) {
  check_field(v, w.rows(), w.cols(), "embedding field vs edge weights");
  return smooth(v, *factorize(build_system(w)));
}

SmoothGradients smooth_backward(const EmbeddingField& u_star, const BilapFactorization& factor,
                                const EmbeddingField& grad_u) {
  const int rows = factor.rows();
  const int cols = factor.cols();
  check_field(u_star, rows, cols, "u* vs system");
  check_field(grad_u, rows, cols, "grad_u vs system");
  if (u_star.channels() != grad_u.channels()) {
    throw Error(ErrorCode::kShapeMismatch, "u* and grad_u channel counts differ");
  }

  SmoothGradients g;
  g.grad_v = EmbeddingField(rows, cols, grad_u.channels());
  g.grad_v.data = factor.solve(grad_u.data);
  g.grad_wx = Grid<double>(rows, cols, 0.0);
  g.grad_wy = Grid<double>(rows, cols, 0.0);

  // dL/dA = -d_v u*^T, and dA/dw_e = D^T e_e e_e^T D, so
  // dL/dw = -(D u*) .* (D d_v), summed over channels.
  const auto& dv = g.grad_v.data;
  const auto& u = u_star.data;
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const Eigen::Index i = static_cast<Eigen::Index>(r) * cols + c;
        if (c + 1 < cols) {
          g.grad_wx(r, c) -= (u(i + 1, k) - u(i, k)) * (dv(i + 1, k) - dv(i, k));
        }
        if (r + 1 < rows) {
          g.grad_wy(r, c) -= (u(i + cols, k) - u(i, k)) * (dv(i + cols, k) - dv(i, k));
        }
      }
    }
  }
  return g;
}

SmoothGradients smooth_backward(const EmbeddingField& u_star, const EdgeWeights& w,
                                const EmbeddingField& grad_u) {
  check_field(u_star, w.rows(), w.cols(), "u* vs edge weights");
  return smooth_backward(u_star, *factorize(build_system(w)), grad_u);
}

}  // namespace rigidflow
