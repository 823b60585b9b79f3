#pragma once

#include "rigidflow/grid.hpp"
#include "rigidflow/se3.hpp"

namespace rigidflow {

/// Dense per-pixel transform field. `scale` is the downsampling factor relative
/// to full input resolution (1 = full, 8 = the usual coarse grid).
struct Se3Field {
  Grid<Se3Transform> transforms;
  int scale = 1;

  Se3Field() = default;
  Se3Field(int rows, int cols, int scale_factor = 1)
      : transforms(rows, cols, Se3Transform::identity()), scale(scale_factor) {}

  int rows() const { return transforms.rows(); }
  int cols() const { return transforms.cols(); }
  Se3Transform& operator()(int r, int c) { return transforms(r, c); }
  const Se3Transform& operator()(int r, int c) const { return transforms(r, c); }
  bool operator==(const Se3Field&) const = default;
};

/// Per-pixel (dx, dy, dd) flow with a validity mask.
struct FlowField3 {
  Grid<Vector3> values;
  Mask valid;

  FlowField3() = default;
  FlowField3(int rows, int cols) : values(rows, cols, Vector3::Zero()), valid(rows, cols, 0) {}

  int rows() const { return values.rows(); }
  int cols() const { return values.cols(); }
};

}  // namespace rigidflow
