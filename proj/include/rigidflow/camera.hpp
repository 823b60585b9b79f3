#pragma once

#include <optional>

#include "rigidflow/grid.hpp"
#include "rigidflow/se3.hpp"

namespace rigidflow {

/// Points with Z at or below this are treated as behind the camera.
inline constexpr double kMinDepth = 1e-6;

struct PinholeIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws InvalidArgument unless both focal lengths are positive and finite.
  void validate() const;
  /// Intrinsics of the grid obtained by keeping every `factor`-th pixel.
  PinholeIntrinsics subsampled(int factor) const;
  bool operator==(const PinholeIntrinsics&) const = default;
};

/// Pixel coordinates plus inverse depth, the output of the augmented projection.
struct AugmentedPixel {
  double x = 0.0;
  double y = 0.0;
  double d = 0.0;

  Vector3 vector() const { return {x, y, d}; }
  static AugmentedPixel from_vector(const Vector3& v) { return {v.x(), v.y(), v.z()}; }
};

struct InverseDepthMap {
  Grid<double> values;
  Mask valid;

  InverseDepthMap() = default;
  InverseDepthMap(int rows, int cols) : values(rows, cols, 0.0), valid(rows, cols, 0) {}
  /// Builds a map from raw values; entries that are not strictly positive and finite are masked.
  static InverseDepthMap from_values(Grid<double> values);

  int rows() const { return values.rows(); }
  int cols() const { return values.cols(); }
  bool is_valid(int r, int c) const { return valid(r, c) != 0; }
};

std::optional<AugmentedPixel> try_project(const Vector3& point, const PinholeIntrinsics& K);
AugmentedPixel project(const Vector3& point, const PinholeIntrinsics& K);

std::optional<Vector3> try_backproject(const AugmentedPixel& pixel, const PinholeIntrinsics& K);
Vector3 backproject(const AugmentedPixel& pixel, const PinholeIntrinsics& K);

/// d(x, y, d) / d(X', Y', Z') evaluated at a camera-frame point.
Matrix3 projection_jacobian(const Vector3& point, const PinholeIntrinsics& K);

/// d(exp(delta) * X') / d(delta) at delta = 0, laid out as (I | -hat(X')).
Eigen::Matrix<double, 3, 6> transform_jacobian(const Vector3& point);

/// Chain rule product of the two Jacobians above (3 x 6).
Eigen::Matrix<double, 3, 6> mapping_jacobian(const Vector3& point, const PinholeIntrinsics& K);

std::optional<AugmentedPixel> try_map_pixel(const AugmentedPixel& pixel, const Se3Transform& T,
                                            const PinholeIntrinsics& K);
AugmentedPixel map_pixel(const AugmentedPixel& pixel, const Se3Transform& T,
                         const PinholeIntrinsics& K);

/// map_pixel(p) - p, evaluated on the ray scaled by inverse depth so that the
/// identity transform yields exactly zero. Nullopt when the moved point is
/// behind the camera or the pixel has no valid depth.
std::optional<Vector3> try_pixel_flow(const AugmentedPixel& pixel, const Se3Transform& T,
                                      const PinholeIntrinsics& K);

/// Bilinear sample at continuous pixel coordinates. Returns nullopt when the
/// footprint leaves the grid or touches an invalid entry. Integer coordinates
/// on the last row/column are sampled without clamping; coordinates less than
/// 1e-9 outside the grid are snapped onto the border.
std::optional<double> sample_bilinear(const InverseDepthMap& map, double x, double y);

/// d' - dbar', where dbar' is frame-2 inverse depth sampled at the mapped location.
std::optional<double> depth_residual(const AugmentedPixel& pixel, const Se3Transform& T,
                                     const PinholeIntrinsics& K, const InverseDepthMap& depth2);

/// Pixel (r, c) of an inverse depth map as an augmented pixel (x = c, y = r).
inline AugmentedPixel pixel_at(const InverseDepthMap& depth, int r, int c) {
  return {static_cast<double>(c), static_cast<double>(r), depth.values(r, c)};
}

}  // namespace rigidflow
