#pragma once

#include <vector>

#include "rigidflow/camera.hpp"
#include "rigidflow/field.hpp"
#include "rigidflow/fieldops.hpp"
#include "rigidflow/synth.hpp"

namespace rigidflow {

/// Per-pixel ||(dx, dy)_pred - (dx, dy)_gt||_2; zero where either is invalid.
Grid<double> epe2d_errors(const FlowField3& pred, const FlowField3& gt);

/// Per-pixel distance between the 3D scene-flow vectors T * X - X of two
/// fields, X backprojected from frame-1 inverse depth.
Grid<double> epe3d_errors(const Se3Field& pred, const Se3Field& gt, const InverseDepthMap& depth1,
                          const PinholeIntrinsics& K);

/// Mean of `errors` over set mask pixels. Throws EmptyMask.
double masked_mean(const Grid<double>& errors, const Mask& mask);

double epe2d(const FlowField3& pred, const FlowField3& gt, const Mask& mask);
double epe3d(const Se3Field& pred, const Se3Field& gt, const InverseDepthMap& depth1,
             const PinholeIntrinsics& K, const Mask& mask);
/// 3D EPE against a synthetic scene over its visible pixels.
double epe3d(const Se3Field& pred, const SyntheticScene& scene);

/// Fraction of masked pixels with error strictly below each threshold.
std::vector<double> threshold_metrics(const Grid<double>& errors, const Mask& mask,
                                      const std::vector<double>& thresholds);

/// Pixels of `mask` whose ground-truth 2D flow magnitude is at most max_flow.
Mask max_flow_mask(const Mask& mask, const FlowField3& gt, double max_flow);

struct MetricReport {
  double epe2d_mean = 0.0;
  double epe3d_mean = 0.0;
  double acc_1px = 0.0;   // delta_2D < 1 px
  double acc3d_05 = 0.0;  // delta_3D < 0.05
  double acc3d_10 = 0.0;  // delta_3D < 0.10
  long pixel_count = 0;
  std::vector<double> objective_curve;
  std::vector<double> update_norm_curve;
  std::vector<double> epe3d_curve;
};

MetricReport evaluate(const Se3Field& pred, const SyntheticScene& scene, const Mask& mask);

}  // namespace rigidflow
