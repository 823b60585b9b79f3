#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rigidflow {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

// se(3) tangent vector laid out as (tau, phi): translational part first,
// rotational part (axis * angle, radians) second.
using Twist = Vector6;

inline auto tau(const Twist& xi) { return xi.head<3>(); }
inline auto phi(const Twist& xi) { return xi.tail<3>(); }
inline Twist make_twist(const Vector3& tau, const Vector3& phi) {
  Twist xi;
  xi << tau, phi;
  return xi;
}

/// Rigid-body transform stored as a unit quaternion plus translation.
class Se3Transform {
 public:
  Se3Transform() : rotation_(Eigen::Quaterniond::Identity()), translation_(Vector3::Zero()) {}
  Se3Transform(const Eigen::Quaterniond& rotation, const Vector3& translation);

  static Se3Transform identity() { return {}; }
  /// Adopts the given quaternion as-is, without renormalizing (deserialization).
  static Se3Transform from_raw(const Eigen::Quaterniond& rotation, const Vector3& translation) {
    Se3Transform T;
    T.rotation_ = rotation;
    T.translation_ = translation;
    return T;
  }
  static Se3Transform from_matrix(const Matrix4& m);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Vector3& translation() const { return translation_; }

  Matrix3 rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Matrix4 matrix() const;

  Se3Transform inverse() const;
  Se3Transform operator*(const Se3Transform& rhs) const;
  Vector3 operator*(const Vector3& point) const { return act(point); }

  /// Applies the transform to a Euclidean point (homogeneous w = 1 implied).
  Vector3 act(const Vector3& point) const { return rotation_ * point + translation_; }

  bool operator==(const Se3Transform& rhs) const {
    return rotation_.coeffs() == rhs.rotation_.coeffs() && translation_ == rhs.translation_;
  }

 private:
  Eigen::Quaterniond rotation_;
  Vector3 translation_;
};

/// Skew-symmetric matrix with hat(w) * u == w x u.
Matrix3 hat(const Vector3& w);

Se3Transform exp(const Twist& xi);
Twist log(const Se3Transform& transform);

/// Left-multiplicative update exp(delta) * T.
Se3Transform retract(const Twist& delta, const Se3Transform& transform);

inline Vector3 act(const Se3Transform& transform, const Vector3& point) {
  return transform.act(point);
}

/// Norm of log(a^-1 * b); zero iff the transforms coincide.
double twist_distance(const Se3Transform& a, const Se3Transform& b);

}  // namespace rigidflow
