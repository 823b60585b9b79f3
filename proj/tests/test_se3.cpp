#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "rigidflow/se3.hpp"
#include "rigidflow/verify.hpp"
#include "support.hpp"

using namespace rigidflow;

namespace {

// 4x4 twist matrix [hat(phi) tau; 0 0], exponentiated by Eigen's generic
// matrix exponential.
Matrix4 matrix_exp(const Twist& xi) {
  Matrix4 m = Matrix4::Zero();
  m.topLeftCorner<3, 3>() = hat(phi(xi));
  m.topRightCorner<3, 1>() = tau(xi);
  return m.exp();
}

}  // namespace

TEST_CASE("exp of zero is identity") {
  const Se3Transform T = exp(Twist::Zero());
  CHECK(T.matrix().isIdentity(0.0));
}

TEST_CASE("exp of pure translation") {
  const Se3Transform T = exp(make_twist(Vector3(1, 2, 3), Vector3::Zero()));
  CHECK(T.rotation_matrix().isIdentity(0.0));
  CHECK((T.translation() - Vector3(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("quarter turn about x") {
  const Se3Transform T = exp(make_twist(Vector3::Zero(), Vector3(std::numbers::pi / 2, 0, 0)));
  // q = (cos 45deg, sin 45deg, 0, 0) written out by hand.
  const double h = std::sqrt(0.5);
  CHECK(std::abs(T.rotation().w() - h) < 1e-15);
  CHECK(std::abs(T.rotation().x() - h) < 1e-15);
  CHECK((T.act(Vector3(0, 1, 0)) - Vector3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("exp agrees with the generic matrix exponential") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Twist xi = verify::random_twist(rng, std::numbers::pi - 1e-3, 1.0);
    CHECK((exp(xi).matrix() - matrix_exp(xi)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("log of identity and a fixed twist") {
  CHECK(log(Se3Transform::identity()).norm() == 0.0);
  Twist xi;
  xi << 0.1, -0.2, 0.3, 0.01, 0.02, -0.03;
  CHECK((log(exp(xi)) - xi).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("exp/log roundtrip over random samples") {
  const auto r = verify::check_exp_log_roundtrip(5, 1000);
  CHECK_MESSAGE(r.passed, r.error);
}

TEST_CASE("log near the pi cut") {
  std::mt19937_64 rng(3);
  for (double angle : {std::numbers::pi - 1e-3, std::numbers::pi - 1e-6, std::numbers::pi}) {
    const Vector3 axis = testing::random_vector(rng).normalized();
    const Twist xi = make_twist(testing::random_vector(rng), angle * axis);
    const Se3Transform T = exp(xi);
    const Twist back = log(T);
    CHECK(phi(back).norm() <= std::numbers::pi + 1e-12);
    CHECK((exp(back).matrix() - T.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("small-angle branch is continuous") {
  const Vector3 axis = Vector3(1, -2, 0.5).normalized();
  const Vector3 t(0.3, -0.1, 0.2);
  const Se3Transform below = exp(make_twist(t, (1e-8 - 1e-15) * axis));
  const Se3Transform above = exp(make_twist(t, (1e-8 + 1e-15) * axis));
  CHECK((below.matrix() - above.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  const Twist lb = log(below);
  const Twist la = log(above);
  CHECK((lb - la).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hat") {
  CHECK(hat(Vector3::Zero()).isZero(0.0));
  Matrix3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK(hat(Vector3(1, 0, 0)) == expected);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector3 w = testing::random_vector(rng);
    const Vector3 u = testing::random_vector(rng);
    const Vector3 cross(w.y() * u.z() - w.z() * u.y(), w.z() * u.x() - w.x() * u.z(),
                        w.x() * u.y() - w.y() * u.x());
    CHECK((hat(w) * u - cross).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((hat(w) + hat(w).transpose()).isZero(0.0));
  }
}

TEST_CASE("retract") {
  std::mt19937_64 rng(2);
  const Se3Transform T = verify::random_transform(rng, 2.0, 1.0);
  CHECK(retract(Twist::Zero(), T) == T);
  const Twist x1 = verify::random_twist(rng, 1.0, 0.5);
  const Twist x2 = verify::random_twist(rng, 1.0, 0.5);
  CHECK(twist_distance(retract(x1, Se3Transform::identity()), exp(x1)) < 1e-12);
  const Matrix4 explicit_product = exp(x2).matrix() * exp(x1).matrix() * T.matrix();
  CHECK((retract(x2, retract(x1, T)).matrix() - explicit_product).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("act is an isometry") {
  std::mt19937_64 rng(4);
  const Se3Transform I = Se3Transform::identity();
  const Vector3 X(0.5, -1, 2);
  CHECK(act(I, X) == X);
  const Se3Transform shift = exp(make_twist(Vector3(1, 2, 3), Vector3::Zero()));
  CHECK((act(shift, X) - (X + Vector3(1, 2, 3))).norm() == 0.0);
  for (int i = 0; i < 200; ++i) {
    const Se3Transform T = verify::random_transform(rng, std::numbers::pi, 3.0);
    const Vector3 a = testing::random_vector(rng, 3.0);
    const Vector3 b = testing::random_vector(rng, 3.0);
    CHECK(std::abs((act(T, a) - act(T, b)).norm() - (a - b).norm()) < 1e-12);
  }
}

TEST_CASE("group axioms") {
  const auto r = verify::check_group_axioms(9, 1000);
  CHECK_MESSAGE(r.passed, r.error);
}

TEST_CASE("composition keeps the quaternion normalized") {
  std::mt19937_64 rng(6);
  Se3Transform acc;
  for (int i = 0; i < 10000; ++i) acc = acc * verify::random_transform(rng, 1.0, 0.1);
  CHECK(std::abs(acc.rotation().norm() - 1.0) < 1e-12);
}

TEST_CASE("from_matrix inverts matrix") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const Se3Transform T = verify::random_transform(rng, 3.0, 2.0);
    CHECK((Se3Transform::from_matrix(T.matrix()).matrix() - T.matrix()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((T.inverse().matrix() - T.matrix().inverse()).cwiseAbs().maxCoeff() < 1e-12);
  }
}
