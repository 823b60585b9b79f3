#include "rigidflow/se3.hpp"

#include <cmath>

namespace rigidflow {

namespace {

constexpr double kSmallAngle = 1e-8;
// Below this angle the cancellation-prone SE(3) coefficients use their series.
constexpr double kSeriesAngle = 1e-2;

// (theta - sin theta) / theta^3
double coeff_c(double theta) {
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (theta - std::sin(theta)) / (theta * theta * theta);
}

// (1 - cos theta) / theta^2, written without cancellation.
double coeff_b(double theta) {
  if (theta < kSmallAngle) {
    return 0.5 - theta * theta / 24.0;
  }
  const double s = std::sin(0.5 * theta) / theta;
  return 2.0 * s * s;
}

// (1 - (theta/2) cot(theta/2)) / theta^2, the Phi^2 coefficient of V^-1.
double coeff_inv(double theta) {
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * theta;
  return (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
}

}  // namespace

Se3Transform::Se3Transform(const Eigen::Quaterniond& rotation, const Vector3& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

Se3Transform Se3Transform::from_matrix(const Matrix4& m) {
  Eigen::Quaterniond q(Matrix3(m.topLeftCorner<3, 3>()));
  return {q, m.topRightCorner<3, 1>()};
}

Matrix4 Se3Transform::matrix() const {
  Matrix4 m = Matrix4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Se3Transform Se3Transform::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return {inv, -(inv * translation_)};
}

Se3Transform Se3Transform::operator*(const Se3Transform& rhs) const {
  return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
}

Matrix3 hat(const Vector3& w) {
  Matrix3 m;
  // clang-format off
  m <<     0.0, -w.z(),  w.y(),
         w.z(),    0.0, -w.x(),
        -w.y(),  w.x(),    0.0;
  // clang-format on
  return m;
}

Se3Transform exp(const Twist& xi) {
  const Vector3 t = tau(xi);
  const Vector3 w = phi(xi);
  const double theta = w.norm();

  Eigen::Quaterniond q;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    q.w() = 1.0 - t2 / 8.0;
    q.vec() = 0.5 * (1.0 - t2 / 24.0) * w;
  } else {
    q.w() = std::cos(0.5 * theta);
    q.vec() = (std::sin(0.5 * theta) / theta) * w;
  }

  const Matrix3 W = hat(w);
  const Matrix3 V = Matrix3::Identity() + coeff_b(theta) * W + coeff_c(theta) * (W * W);
  return {q, V * t};
}

Twist log(const Se3Transform& transform) {
  Eigen::Quaterniond q = transform.rotation();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  const double n = q.vec().norm();
  Vector3 w;
  double theta;
  if (n < kSmallAngle) {
    // 2 atan(n / qw) / n expanded around n = 0.
    const double qw = q.w();
    w = (2.0 / qw) * (1.0 - n * n / (3.0 * qw * qw)) * q.vec();
    theta = w.norm();
  } else {
    theta = 2.0 * std::atan2(n, q.w());
    w = (theta / n) * q.vec();
  }

  const Matrix3 W = hat(w);
  const Matrix3 V_inv = Matrix3::Identity() - 0.5 * W + coeff_inv(theta) * (W * W);
  return make_twist(V_inv * transform.translation(), w);
}

Se3Transform retract(const Twist& delta, const Se3Transform& transform) {
  if (delta.isZero(0.0)) {
    return transform;
  }
  return exp(delta) * transform;
}

double twist_distance(const Se3Transform& a, const Se3Transform& b) {
  return log(a.inverse() * b).norm();
}

}  // namespace rigidflow
