#include "rigidflow/metrics.hpp"

#include <cmath>

namespace rigidflow {

Grid<double> epe2d_errors(const FlowField3& pred, const FlowField3& gt) {
  require_same_shape(pred.values, gt.values, "predicted vs ground-truth flow");
  Grid<double> err(pred.rows(), pred.cols(), 0.0);
  for (std::size_t i = 0; i < err.size(); ++i) {
    if (!pred.valid[i] || !gt.valid[i]) continue;
    err[i] = (pred.values[i].head<2>() - gt.values[i].head<2>()).norm();
  }
  return err;
}

Grid<double> epe3d_errors(const Se3Field& pred, const Se3Field& gt, const InverseDepthMap& depth1,
                          const PinholeIntrinsics& K) {
  require_same_shape(pred.transforms, gt.transforms, "predicted vs ground-truth field");
  require_same_shape(pred.transforms, depth1.values, "field vs inverse depth");
  Grid<double> err(pred.rows(), pred.cols(), 0.0);
  for (int r = 0; r < pred.rows(); ++r) {
    for (int c = 0; c < pred.cols(); ++c) {
      if (!depth1.is_valid(r, c)) continue;
      const Vector3 X = backproject(pixel_at(depth1, r, c), K);
      // (T_pred X - X) - (T_gt X - X)
      err(r, c) = (pred(r, c).act(X) - gt(r, c).act(X)).norm();
    }
  }
  return err;
}

double masked_mean(const Grid<double>& errors, const Mask& mask) {
  require_same_shape(errors, mask, "errors vs mask");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!mask[i]) continue;
    sum += errors[i];
    ++n;
  }
  if (n == 0) {
    throw Error(ErrorCode::kEmptyMask, "metric mask selects no pixel");
  }
  return sum / static_cast<double>(n);
}

double epe2d(const FlowField3& pred, const FlowField3& gt, const Mask& mask) {
  return masked_mean(epe2d_errors(pred, gt), mask);
}

double epe3d(const Se3Field& pred, const Se3Field& gt, const InverseDepthMap& depth1,
             const PinholeIntrinsics& K, const Mask& mask) {
  return masked_mean(epe3d_errors(pred, gt, depth1, K), mask);
}

double epe3d(const Se3Field& pred, const SyntheticScene& scene) {
  return epe3d(pred, scene.gt_field, scene.depth1, scene.spec.intrinsics, scene.visible_mask());
}

std::vector<double> threshold_metrics(const Grid<double>& errors, const Mask& mask,
                                      const std::vector<double>& thresholds) {
  require_same_shape(errors, mask, "errors vs mask");
  for (double t : thresholds) {
    if (!(t > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "thresholds must be positive");
    }
  }
  std::vector<std::size_t> below(thresholds.size(), 0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!mask[i]) continue;
    ++n;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      if (errors[i] < thresholds[k]) ++below[k];
    }
  }
  if (n == 0) {
    throw Error(ErrorCode::kEmptyMask, "metric mask selects no pixel");
  }
  std::vector<double> out;
  for (std::size_t count : below) {
    out.push_back(static_cast<double>(count) / static_cast<double>(n));
  }
  return out;
}

Mask max_flow_mask(const Mask& mask, const FlowField3& gt, double max_flow) {
  require_same_shape(mask, gt.values, "mask vs flow");
  Mask out = mask;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] && gt.values[i].head<2>().norm() > max_flow) out[i] = 0;
  }
  return out;
}

MetricReport evaluate(const Se3Field& pred, const SyntheticScene& scene, const Mask& mask) {
  const auto& K = scene.spec.intrinsics;
  const FlowField3 flow = induced_flow(pred, scene.depth1, K);
  Mask m = mask;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!flow.valid[i] || !scene.gt_flow.valid[i]) m[i] = 0;
  }
  const Grid<double> e2 = epe2d_errors(flow, scene.gt_flow);
  const Grid<double> e3 = epe3d_errors(pred, scene.gt_field, scene.depth1, K);

  MetricReport report;
  report.epe2d_mean = masked_mean(e2, m);
  report.epe3d_mean = masked_mean(e3, m);
  report.acc_1px = threshold_metrics(e2, m, {1.0})[0];
  const auto acc3d = threshold_metrics(e3, m, {0.05, 0.10});
  report.acc3d_05 = acc3d[0];
  report.acc3d_10 = acc3d[1];
  for (auto v : m.values()) report.pixel_count += v ? 1 : 0;
  return report;
}

}  // namespace rigidflow
