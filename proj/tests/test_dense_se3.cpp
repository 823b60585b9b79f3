#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "rigidflow/dense_se3.hpp"
#include "rigidflow/verify.hpp"
#include "support.hpp"

using namespace rigidflow;

namespace {

Eigen::RowVectorXd row(std::initializer_list<double> v) {
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

verify::RandomProblem problem(std::uint64_t seed, int rows = 8, int cols = 8) {
  std::mt19937_64 rng(seed);
  return verify::random_problem(rng, rows, cols, 3);
}

}  // namespace

TEST_CASE("affinity") {
  const auto v = row({0.3, -1.2, 4.0});
  CHECK(affinity(v, v) == 1.0);
  CHECK(std::abs(affinity(row({0.0}), row({std::sqrt(std::log(3.0))})) - 0.5) < 1e-15);
  CHECK(affinity(row({0.0, 0.0}), row({5.0, 5.0})) < 1e-20);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  double prev = 1.0;
  for (int k = 1; k < 20; ++k) {
    const double a = affinity(row({0.0}), row({0.2 * k}));
    CHECK(a < prev);
    prev = a;
    const auto x = row({n(rng), n(rng), n(rng)});
    const auto y = row({n(rng), n(rng), n(rng)});
    CHECK(affinity(x, y) == affinity(y, x));
  }
}

TEST_CASE("residual") {
  auto p = problem(2);
  const PixelIndex i{3, 3};
  const PixelIndex j{4, 5};
  p.revisions.revision(j.r, j.c).setZero();
  p.field(i.r, i.c) = p.field(j.r, j.c);
  auto e = residual(i, j, p.field, p.revisions, p.depth1, p.K);
  REQUIRE(e.has_value());
  CHECK(e->norm() < 1e-12);

  p.revisions.revision(j.r, j.c) = Vector3(1, 0, 0);
  e = residual(i, j, p.field, p.revisions, p.depth1, p.K);
  CHECK((*e - Vector3(1, 0, 0)).norm() < 1e-12);

  // Identity at i: the residual is the flow of pixel j under T_j.
  p.revisions.revision(j.r, j.c).setZero();
  p.field(i.r, i.c) = Se3Transform::identity();
  e = residual(i, j, p.field, p.revisions, p.depth1, p.K);
  const AugmentedPixel pj = pixel_at(p.depth1, j.r, j.c);
  const Vector3 flow = map_pixel(pj, p.field(j.r, j.c), p.K).vector() - pj.vector();
  CHECK((*e - flow).norm() < 1e-12);

  p.depth1.valid(j.r, j.c) = 0;
  CHECK_FALSE(residual(i, j, p.field, p.revisions, p.depth1, p.K).has_value());
}

TEST_CASE("zero confidence gives zero systems") {
  auto p = problem(3);
  for (auto& w : p.revisions.confidence.values()) w.setZero();
  const auto sys = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, {3, 1});
  for (const auto& s : sys.values()) {
    CHECK(s.H.isZero(0.0));
    CHECK(s.b.isZero(0.0));
    CHECK_FALSE(s.constrained);
  }
}

TEST_CASE("single-pixel neighborhood") {
  const auto p = problem(4);
  // A stride larger than the radius leaves only the center.
  const auto sys = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, {1, 2});
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (!p.depth1.is_valid(r, c)) continue;
      const Vector3 X = backproject(pixel_at(p.depth1, r, c), p.K);
      const Vector3 P = p.field(r, c).act(X);
      const Eigen::MatrixXd J = verify::expanded_mapping_jacobian(P, p.K);
      const Eigen::MatrixXd W = p.revisions.confidence(r, c).asDiagonal();
      const Eigen::MatrixXd H = J.transpose() * W * J;
      CHECK((sys(r, c).H - H).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("normal equations match the dense oracle") {
  for (int size : {8, 12, 16}) {
    const auto r = verify::check_normal_equations(10 + size, size, size, 3);
    CHECK_MESSAGE(r.passed, r.detail);
  }
  const auto strided = verify::check_normal_equations(5, 16, 16, 6, 3);
  CHECK_MESSAGE(strided.passed, strided.detail);
}

TEST_CASE("normal equations are symmetric and thread-count invariant") {
  const auto p = problem(6, 16, 16);
  const auto one = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, {4, 1}, 1);
  const auto many = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, {4, 1}, 3);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK((one[i].H - one[i].H.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(one[i].H == many[i].H);
    CHECK(one[i].b == many[i].b);
  }
}

TEST_CASE("solve_damped") {
  NormalSystem6 sys;
  sys.constrained = true;
  sys.total_weight = 1.0;
  sys.H = Matrix6::Identity();
  CHECK(solve_damped(sys).delta.isZero(0.0));

  sys.b = Vector6::Unit(0);
  const auto e1 = solve_damped(sys, {0.0, 0.0});
  CHECK(e1.status == PixelStatus::kOk);
  CHECK((e1.delta - Vector6::Unit(0)).norm() == 0.0);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 50; ++k) {
    Matrix6 M;
    for (int i = 0; i < 36; ++i) M(i) = n(rng);
    sys.H = M * M.transpose() + Matrix6::Identity();
    for (int i = 0; i < 6; ++i) sys.b(i) = n(rng);
    const DampingParams d{1e-3, 1e-8};
    Matrix6 A = sys.H;
    A.diagonal() += d.relative * sys.H.diagonal() + Vector6::Constant(d.absolute);
    const Vector6 expected = A.inverse() * sys.b;
    CHECK((solve_damped(sys, d).delta - expected).cwiseAbs().maxCoeff() < 1e-10);
  }

  NormalSystem6 empty;
  const auto unc = solve_damped(empty);
  CHECK(unc.status == PixelStatus::kUnconstrained);
  CHECK(unc.delta.isZero(0.0));

  NormalSystem6 bad;
  bad.constrained = true;
  bad.H = -Matrix6::Identity();
  bad.b = Vector6::Ones();
  const auto fail = solve_damped(bad);
  CHECK(fail.status == PixelStatus::kFactorizationFailure);
  CHECK(fail.delta.isZero(0.0));
}

TEST_CASE("step on a consistent field is a no-op") {
  auto p = problem(8);
  for (auto& r : p.revisions.revision.values()) r.setZero();
  const Se3Transform T = p.field(0, 0);
  for (auto& t : p.field.transforms.values()) t = T;
  const auto step = dense_se3_step(p.field, p.embeddings, p.revisions, p.depth1, p.K, {3, 1});
  for (std::size_t i = 0; i < step.field.transforms.size(); ++i) {
    CHECK(twist_distance(step.field.transforms[i], T) < 1e-12);
  }
}

TEST_CASE("step leaves unconstrained pixels unchanged") {
  auto p = problem(9);
  for (auto& w : p.revisions.confidence.values()) w.setZero();
  const auto step = dense_se3_step(p.field, p.embeddings, p.revisions, p.depth1, p.K, {2, 1});
  CHECK(step.field == p.field);
  CHECK(step.unconstrained == 64);
}

TEST_CASE("update does not increase the linearized objective") {
  const auto p = problem(10);
  const Neighborhood nbhd{3, 1};
  const auto systems = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, nbhd);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const auto sol = solve_damped(systems(r, c));
      if (sol.status != PixelStatus::kOk) continue;
      // Quadratic model: E(delta) = E0 - 2 b.delta + delta^T H delta.
      const auto& s = systems(r, c);
      const double model = s.energy - 2.0 * s.b.dot(sol.delta) + sol.delta.dot(s.H * sol.delta);
      CHECK(model <= s.energy + 1e-9 * std::max(1.0, s.energy));
    }
  }
}

TEST_CASE("linear solve adjoint") {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(6, -1, 1);
  const auto zero = linear_solve_adjoint(H, u, Eigen::VectorXd::Zero(6));
  CHECK(zero.grad_b.isZero(0.0));
  CHECK(zero.grad_H.isZero(0.0));
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(6, 2, 3);
  CHECK((linear_solve_adjoint(H, u, g).grad_b - g).norm() == 0.0);

  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = verify::check_linear_solve_adjoint(seed, 6);
    CHECK_MESSAGE(r.passed, r.error);
  }
}
