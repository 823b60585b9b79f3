#pragma once

#include <memory>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rigidflow/dense_se3.hpp"
#include "rigidflow/grid.hpp"

namespace rigidflow {

/// Nonnegative smoothing weights on horizontal (w_x) and vertical (w_y)
/// forward differences. w_x at the last column and w_y at the last row
/// belong to no edge and are ignored.
struct EdgeWeights {
  Grid<double> wx;
  Grid<double> wy;

  EdgeWeights() = default;
  EdgeWeights(int rows, int cols, double fill = 0.0) : wx(rows, cols, fill), wy(rows, cols, fill) {}

  int rows() const { return wx.rows(); }
  int cols() const { return wx.cols(); }
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Forward-difference operator along columns: (D_x u)(r,c) = u(r,c+1) - u(r,c),
/// with zero rows on the last column.
SparseMatrix difference_x(int rows, int cols);
/// Forward-difference operator along rows, zero rows on the last row.
SparseMatrix difference_y(int rows, int cols);

/// A = I + D_x^T W_x D_x + D_y^T W_y D_y over an H x W grid.
struct BilapSystem {
  int rows = 0;
  int cols = 0;
  SparseMatrix A;
};

BilapSystem build_system(const EdgeWeights& w);

class BilapFactorization;
using BilapFactorizationPtr = std::shared_ptr<const BilapFactorization>;

/// Immutable sparse Cholesky factor of a BilapSystem. Safe to solve against
/// from several threads at once.
class BilapFactorization {
 public:
  ~BilapFactorization();
  BilapFactorization(const BilapFactorization&) = delete;
  BilapFactorization& operator=(const BilapFactorization&) = delete;

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// Solves A X = B for all columns of B (one column per channel).
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  friend BilapFactorizationPtr factorize(const BilapSystem& sys);
  struct Impl;
  BilapFactorization(int rows, int cols, std::unique_ptr<Impl> impl);

  int rows_;
  int cols_;
  std::unique_ptr<Impl> impl_;
};

BilapFactorizationPtr factorize(const BilapSystem& sys);

/// Per channel, the minimizer of ||D_x u||^2_wx + ||D_y u||^2_wy + ||u - v||^2.
EmbeddingField smooth(const EmbeddingField& v, const EdgeWeights& w);
EmbeddingField smooth(const EmbeddingField& v, const BilapFactorization& factor);

struct SmoothGradients {
  EmbeddingField grad_v;
  Grid<double> grad_wx;
  Grid<double> grad_wy;
};

/// Backward pass of smooth(). Weight gradients are summed over channels.
SmoothGradients smooth_backward(const EmbeddingField& u_star, const EdgeWeights& w,
                                const EmbeddingField& grad_u);
SmoothGradients smooth_backward(const EmbeddingField& u_star, const BilapFactorization& factor,
                                const EmbeddingField& grad_u);

}  // namespace rigidflow
