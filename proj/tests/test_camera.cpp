#include <cmath>
#include <random>

#include "doctest.h"
#include "rigidflow/camera.hpp"
#include "rigidflow/error.hpp"
#include "rigidflow/synth.hpp"
#include "rigidflow/verify.hpp"
#include "support.hpp"

using namespace rigidflow;

namespace {

const PinholeIntrinsics kUnit{1, 1, 0, 0};
const PinholeIntrinsics kHundred{100, 100, 50, 50};

}  // namespace

TEST_CASE("project") {
  const AugmentedPixel p = project(Vector3(0, 0, 1), kUnit);
  CHECK(p.vector() == Vector3(0, 0, 1));
  // 100 * 2/4 + 50 = 100, 100 * -1/4 + 50 = 25, 1/4.
  CHECK((project(Vector3(2, -1, 4), kHundred).vector() - Vector3(100, 25, 0.25)).norm() < 1e-14);
  CHECK_THROWS_AS(project(Vector3(0, 0, 0), kUnit), Error);
  CHECK_THROWS_AS(project(Vector3(0, 0, -1), kUnit), Error);
  CHECK_FALSE(try_project(Vector3(1, 1, kMinDepth), kUnit).has_value());
}

TEST_CASE("backproject") {
  CHECK(backproject({0, 0, 1}, kUnit) == Vector3(0, 0, 1));
  CHECK((backproject({100, 25, 0.25}, kHundred) - Vector3(2, -1, 4)).norm() < 1e-14);
  try {
    backproject({1, 1, 0}, kUnit);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveInverseDepth);
  }
  // Asymmetric principal point pins the y row to (y - cy) / fy.
  const PinholeIntrinsics K{200, 100, 30, 70};
  const Vector3 X = backproject({30, 170, 0.5}, K);
  CHECK((X - Vector3(0, 2, 2)).norm() < 1e-14);
}

TEST_CASE("project and backproject are inverse") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_real_distribution<double> z(0.5, 20);
  const PinholeIntrinsics K{320, 300, 160, 120};
  for (int i = 0; i < 1000; ++i) {
    const Vector3 X(u(rng), u(rng), z(rng));
    CHECK((backproject(project(X, K), K) - X).norm() < 1e-10);
    const AugmentedPixel p{u(rng) * 100, u(rng) * 100, 1.0 / z(rng)};
    CHECK((project(backproject(p, K), K).vector() - p.vector()).norm() < 1e-10);
  }
}

TEST_CASE("projection Jacobian") {
  Matrix3 expected;
  expected << 1, 0, 0, 0, 1, 0, 0, 0, -1;
  CHECK(projection_jacobian(Vector3(0, 0, 1), kUnit) == expected);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const Vector3 X(u(rng), u(rng), 1.5 + u(rng));
    const auto f = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
      return project(Vector3(p), kHundred).vector();
    };
    const Eigen::MatrixXd numeric = verify::central_difference(f, X, 1e-6);
    CHECK(verify::relative_error(projection_jacobian(X, kHundred), numeric) < 1e-6);
  }

  const Vector3 X(0.3, -0.2, 2.0);
  const PinholeIntrinsics doubled{2 * kHundred.fx, kHundred.fy, kHundred.cx, kHundred.cy};
  const Matrix3 a = projection_jacobian(X, kHundred);
  const Matrix3 b = projection_jacobian(X, doubled);
  CHECK((b.row(0) - 2 * a.row(0)).norm() < 1e-14);
  CHECK(b.bottomRows<2>() == a.bottomRows<2>());
  CHECK_THROWS_AS(projection_jacobian(Vector3(1, 1, 0), kUnit), Error);
}

TEST_CASE("transform Jacobian") {
  const auto J0 = transform_jacobian(Vector3::Zero());
  CHECK(J0.leftCols<3>().isIdentity(0.0));
  CHECK(J0.rightCols<3>().isZero(0.0));
  // Left update: d(exp(delta) X)/d(phi) = -hat(X).
  const auto J1 = transform_jacobian(Vector3(0, 0, 1));
  CHECK(J1.rightCols<3>() == -hat(Vector3(0, 0, 1)));
}

TEST_CASE("mapping Jacobian matches finite differences") {
  const auto r = verify::check_mapping_jacobian(3, 100);
  CHECK_MESSAGE(r.passed, r.error);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Vector3 P(0.2 * i - 2, 1 - 0.1 * i, 1 + 0.2 * i);
    CHECK((mapping_jacobian(P, kHundred) - verify::expanded_mapping_jacobian(P, kHundred))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("map_pixel") {
  std::mt19937_64 rng(5);
  const AugmentedPixel p{12.5, -3.0, 0.4};
  // A few ulps at pixel coordinates near 100.
  CHECK((map_pixel(p, Se3Transform::identity(), kHundred).vector() - p.vector()).norm() < 1e-12);
  const Se3Transform dz = exp(make_twist(Vector3(0, 0, 1), Vector3::Zero()));
  CHECK((map_pixel({0, 0, 1}, dz, kUnit).vector() - Vector3(0, 0, 0.5)).norm() < 1e-15);
  const Se3Transform back = exp(make_twist(Vector3(0, 0, -5), Vector3::Zero()));
  CHECK_THROWS_AS(map_pixel({0, 0, 1}, back, kUnit), Error);

  for (int i = 0; i < 200; ++i) {
    const Se3Transform T1 = verify::random_transform(rng, 0.3, 0.3);
    const Se3Transform T2 = verify::random_transform(rng, 0.3, 0.3);
    const AugmentedPixel q{50 + 10 * testing::random_vector(rng).x(), 40.0, 0.3};
    const Vector3 X = backproject(q, kHundred);
    const Vector3 direct = project(T2.act(T1.act(X)), kHundred).vector();
    CHECK((map_pixel(q, T2 * T1, kHundred).vector() - direct).norm() < 1e-10);
  }
}

TEST_CASE("pixel flow") {
  const AugmentedPixel p{12.5, -3.0, 0.4};
  CHECK(try_pixel_flow(p, Se3Transform::identity(), kHundred)->isZero(0.0));
  CHECK_FALSE(try_pixel_flow({1, 1, 0.0}, Se3Transform::identity(), kHundred).has_value());
  const Se3Transform behind = exp(make_twist(Vector3(0, 0, -5), Vector3::Zero()));
  CHECK_FALSE(try_pixel_flow(p, behind, kHundred).has_value());

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  std::uniform_real_distribution<double> dd(0.2, 1.0);
  for (int i = 0; i < 200; ++i) {
    const AugmentedPixel q{u(rng), u(rng), dd(rng)};
    const Se3Transform T = verify::random_transform(rng, 0.3, 0.3);
    const Vector3 expected = map_pixel(q, T, kHundred).vector() - q.vector();
    CHECK((*try_pixel_flow(q, T, kHundred) - expected).norm() < 1e-10);
  }
}

TEST_CASE("bilinear sampling") {
  Grid<double> g(3, 4, 0.0);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) g(r, c) = 1.0 + 0.25 * c + 0.5 * r;
  }
  const InverseDepthMap m = InverseDepthMap::from_values(g);
  CHECK(*sample_bilinear(m, 3.0, 2.0) == g(2, 3));
  CHECK(*sample_bilinear(m, -1e-12, 2.0) == g(2, 0));
  CHECK(*sample_bilinear(m, 3.0 + 1e-12, 0.0) == g(0, 3));
  CHECK(std::abs(*sample_bilinear(m, 1.5, 0.25) - (1.0 + 0.375 + 0.125)) < 1e-15);
  CHECK_FALSE(sample_bilinear(m, -0.1, 1.0).has_value());
  CHECK_FALSE(sample_bilinear(m, 3.01, 1.0).has_value());
  g(1, 1) = 0.0;
  const InverseDepthMap holes = InverseDepthMap::from_values(g);
  CHECK_FALSE(sample_bilinear(holes, 0.5, 0.5).has_value());
  CHECK(sample_bilinear(holes, 2.5, 0.0).has_value());
}

TEST_CASE("depth residual on a static constant-depth plane") {
  const InverseDepthMap z = InverseDepthMap::from_values(Grid<double>(8, 10, 0.25));
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 10; ++c) {
      const auto res = depth_residual(pixel_at(z, r, c), Se3Transform::identity(), kHundred, z);
      REQUIRE(res.has_value());
      CHECK(std::abs(*res) < 1e-12);
    }
  }
}

TEST_CASE("depth residual under ground-truth motion") {
  SceneSpec spec;
  spec.num_objects = 3;
  spec.seed = 42;
  const SyntheticScene scene = generate(spec);
  const Mask visible = scene.visible_mask();
  int checked = 0;
  for (int r = 0; r < scene.rows(); ++r) {
    for (int c = 0; c < scene.cols(); ++c) {
      if (!visible(r, c)) continue;
      const auto res = depth_residual(pixel_at(scene.depth1, r, c), scene.gt_field(r, c),
                                      scene.spec.intrinsics, scene.depth2);
      REQUIRE(res.has_value());
      CHECK(std::abs(*res) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}
