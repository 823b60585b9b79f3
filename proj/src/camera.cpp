#include "rigidflow/camera.hpp"

#include <cmath>

namespace rigidflow {

void PinholeIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive and finite");
  }
}

PinholeIntrinsics PinholeIntrinsics::subsampled(int factor) const {
  const double f = static_cast<double>(factor);
  return {fx / f, fy / f, cx / f, cy / f};
}

InverseDepthMap InverseDepthMap::from_values(Grid<double> values) {
  InverseDepthMap map;
  map.valid = Mask(values.rows(), values.cols(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i];
    map.valid[i] = (std::isfinite(d) && d > 0.0) ? 1 : 0;
  }
  map.values = std::move(values);
  return map;
}

std::optional<AugmentedPixel> try_project(const Vector3& point, const PinholeIntrinsics& K) {
  if (!(point.z() > kMinDepth)) {
    return std::nullopt;
  }
  const double d = 1.0 / point.z();
  return AugmentedPixel{K.fx * point.x() * d + K.cx, K.fy * point.y() * d + K.cy, d};
}

AugmentedPixel project(const Vector3& point, const PinholeIntrinsics& K) {
  auto p = try_project(point, K);
  if (!p) {
    throw Error(ErrorCode::kNonPositiveDepth, "point at Z=" + std::to_string(point.z()));
  }
  return *p;
}

std::optional<Vector3> try_backproject(const AugmentedPixel& pixel, const PinholeIntrinsics& K) {
  if (!(pixel.d > 0.0) || !std::isfinite(pixel.d)) {
    return std::nullopt;
  }
  const double z = 1.0 / pixel.d;
  return Vector3((pixel.x - K.cx) / K.fx * z, (pixel.y - K.cy) / K.fy * z, z);
}

Vector3 backproject(const AugmentedPixel& pixel, const PinholeIntrinsics& K) {
  auto X = try_backproject(pixel, K);
  if (!X) {
    throw Error(ErrorCode::kNonPositiveInverseDepth, "d=" + std::to_string(pixel.d));
  }
  return *X;
}

Matrix3 projection_jacobian(const Vector3& point, const PinholeIntrinsics& K) {
  if (!(point.z() > kMinDepth)) {
    throw Error(ErrorCode::kNonPositiveDepth, "point at Z=" + std::to_string(point.z()));
  }
  const double d = 1.0 / point.z();
  const double d2 = d * d;
  Matrix3 J;
  // clang-format off
  J << K.fx * d,      0.0, -K.fx * point.x() * d2,
            0.0, K.fy * d, -K.fy * point.y() * d2,
            0.0,      0.0,                    -d2;
  // clang-format on
  return J;
}

Eigen::Matrix<double, 3, 6> transform_jacobian(const Vector3& point) {
  Eigen::Matrix<double, 3, 6> J;
  J.leftCols<3>().setIdentity();
  J.rightCols<3>() = -hat(point);
  return J;
}

Eigen::Matrix<double, 3, 6> mapping_jacobian(const Vector3& point, const PinholeIntrinsics& K) {
  return projection_jacobian(point, K) * transform_jacobian(point);
}

std::optional<AugmentedPixel> try_map_pixel(const AugmentedPixel& pixel, const Se3Transform& T,
                                            const PinholeIntrinsics& K) {
  const auto X = try_backproject(pixel, K);
  if (!X) {
    return std::nullopt;
  }
  return try_project(T.act(*X), K);
}

AugmentedPixel map_pixel(const AugmentedPixel& pixel, const Se3Transform& T,
                         const PinholeIntrinsics& K) {
  return project(T.act(backproject(pixel, K)), K);
}

std::optional<Vector3> try_pixel_flow(const AugmentedPixel& pixel, const Se3Transform& T,
                                      const PinholeIntrinsics& K) {
  const double d = pixel.d;
  if (!(d > 0.0) || !std::isfinite(d)) {
    return std::nullopt;
  }
  // d * T(X) = R (xn, yn, 1) + d t
  const Vector3 ray((pixel.x - K.cx) / K.fx, (pixel.y - K.cy) / K.fy, 1.0);
  const Vector3 P = T.rotation() * ray + d * T.translation();
  if (!(P.z() > kMinDepth * d)) {
    return std::nullopt;
  }
  return Vector3(K.fx * (P.x() / P.z() - ray.x()), K.fy * (P.y() / P.z() - ray.y()), d / P.z() - d);
}

std::optional<double> sample_bilinear(const InverseDepthMap& map, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) {
    return std::nullopt;
  }
  // Rounding in the projection can push border pixels a few ulps outside.
  constexpr double kEdgeSlack = 1e-9;
  if (x < 0.0 && x > -kEdgeSlack) x = 0.0;
  if (y < 0.0 && y > -kEdgeSlack) y = 0.0;
  const double last_col = map.cols() - 1;
  const double last_row = map.rows() - 1;
  if (x > last_col && x < last_col + kEdgeSlack) x = last_col;
  if (y > last_row && y < last_row + kEdgeSlack) y = last_row;
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int c0 = static_cast<int>(fx0);
  const int r0 = static_cast<int>(fy0);
  const double ax = x - fx0;
  const double ay = y - fy0;
  const int c1 = ax > 0.0 ? c0 + 1 : c0;
  const int r1 = ay > 0.0 ? r0 + 1 : r0;
  if (c0 < 0 || r0 < 0 || c1 >= map.cols() || r1 >= map.rows()) {
    return std::nullopt;
  }
  if (!map.is_valid(r0, c0) || !map.is_valid(r0, c1) || !map.is_valid(r1, c0) ||
      !map.is_valid(r1, c1)) {
    return std::nullopt;
  }
  const auto& v = map.values;
  const double top = (1.0 - ax) * v(r0, c0) + ax * v(r0, c1);
  const double bottom = (1.0 - ax) * v(r1, c0) + ax * v(r1, c1);
  return (1.0 - ay) * top + ay * bottom;
}

std::optional<double> depth_residual(const AugmentedPixel& pixel, const Se3Transform& T,
                                     const PinholeIntrinsics& K, const InverseDepthMap& depth2) {
  const auto mapped = try_map_pixel(pixel, T, K);
  if (!mapped) {
    return std::nullopt;
  }
  const auto sampled = sample_bilinear(depth2, mapped->x, mapped->y);
  if (!sampled) {
    return std::nullopt;
  }
  return mapped->d - *sampled;
}

}  // namespace rigidflow
