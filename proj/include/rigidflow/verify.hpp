#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rigidflow/bilap.hpp"
#include "rigidflow/camera.hpp"
#include "rigidflow/dense_se3.hpp"

// Reference implementations and numerical checks. Nothing here shares code
// paths with the routines it checks: Jacobians are written out in closed form
// or differenced numerically, and normal equations are formed from explicit
// dense matrices.
namespace rigidflow::verify {

struct CheckResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// Central differences of f: R^n -> R^m around x.
Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h);

/// max |a - b| / max(max |b|, floor).
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12);

/// The 3x6 Jacobian of pi(exp(delta) * P) at delta = 0, expanded by hand.
Eigen::Matrix<double, 3, 6> expanded_mapping_jacobian(const Vector3& P, const PinholeIntrinsics& K);

/// Normal equations from a stacked dense Jacobian, diagonal weight matrix and
/// residual vector for every pixel: H = J^T diag(a * w) J, b = J^T diag(a * w) r.
Grid<NormalSystem6> brute_force_normal_equations(const Se3Field& T,
                                                 const EmbeddingField& embeddings,
                                                 const RevisionBundle& rev,
                                                 const InverseDepthMap& depth1,
                                                 const PinholeIntrinsics& K,
                                                 const Neighborhood& nbhd);

Se3Transform random_transform(std::mt19937_64& rng, double max_angle, double max_translation);
Twist random_twist(std::mt19937_64& rng, double max_angle, double translation_sigma);

struct RandomProblem {
  Se3Field field;
  EmbeddingField embeddings;
  RevisionBundle revisions;
  InverseDepthMap depth1;
  PinholeIntrinsics K;
};

/// Random Dense-SE3 inputs on an H x W grid with intrinsics that keep
/// normalized coordinates near unit scale.
RandomProblem random_problem(std::mt19937_64& rng, int rows, int cols, int channels);

CheckResult check_exp_log_roundtrip(std::uint64_t seed, int samples = 1000);
CheckResult check_group_axioms(std::uint64_t seed, int samples = 1000);
CheckResult check_mapping_jacobian(std::uint64_t seed, int samples = 100);
CheckResult check_normal_equations(std::uint64_t seed, int rows, int cols, int radius,
                                   int stride = 1);
CheckResult check_linear_solve_adjoint(std::uint64_t seed, int size = 6);
CheckResult check_bilap_residual(std::uint64_t seed, int rows, int cols);
CheckResult check_bilap_gradients(std::uint64_t seed, int rows, int cols, int channels);
CheckResult check_bilap_channels(std::uint64_t seed, int rows, int cols, int channels);

/// The quick battery run by `dense_se3 selftest`.
std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace rigidflow::verify
