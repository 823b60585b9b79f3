#include "rigidflow/fieldops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rigidflow {

Grid<Twist> twist_field(const Se3Field& T) {
  Grid<Twist> out(T.rows(), T.cols(), Twist::Zero());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = log(T.transforms[i]);
  }
  return out;
}

Se3Field exp_field(const Grid<Twist>& twists, int scale) {
  Se3Field out(twists.rows(), twists.cols(), scale);
  for (std::size_t i = 0; i < twists.size(); ++i) {
    out.transforms[i] = exp(twists[i]);
  }
  return out;
}

FlowField3 induced_flow(const Se3Field& T, const InverseDepthMap& depth1,
                        const PinholeIntrinsics& K) {
  require_same_shape(T.transforms, depth1.values, "transform field vs inverse depth");
  FlowField3 flow(T.rows(), T.cols());
  for (int r = 0; r < T.rows(); ++r) {
    for (int c = 0; c < T.cols(); ++c) {
      if (!depth1.is_valid(r, c)) continue;
      const AugmentedPixel p = pixel_at(depth1, r, c);
      const auto f = try_pixel_flow(p, T(r, c), K);
      if (!f) continue;
      flow.values(r, c) = *f;
      flow.valid(r, c) = 1;
    }
  }
  return flow;
}

void UpsampleWeights::validate() const {
  if (factor < 1) {
    throw Error(ErrorCode::kInvalidArgument, "upsampling factor must be >= 1");
  }
  for (const auto& w : weights.values()) {
    double sum = 0.0;
    for (double v : w) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kNonConvexWeights, "negative or non-finite weight");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw Error(ErrorCode::kNonConvexWeights, "weights sum to " + std::to_string(sum));
    }
  }
}

UpsampleWeights bilinear_upsample_weights(int coarse_rows, int coarse_cols, int factor) {
  UpsampleWeights out;
  out.factor = factor;
  out.weights = Grid<std::array<double, 9>>(coarse_rows * factor, coarse_cols * factor,
                                            std::array<double, 9>{});
  for (int R = 0; R < out.weights.rows(); ++R) {
    const double ay = static_cast<double>(R % factor) / factor;
    for (int C = 0; C < out.weights.cols(); ++C) {
      const double ax = static_cast<double>(C % factor) / factor;
      auto& w = out.weights(R, C);
      w[4] = (1.0 - ay) * (1.0 - ax);
      w[5] = (1.0 - ay) * ax;
      w[7] = ay * (1.0 - ax);
      w[8] = ay * ax;
    }
  }
  return out;
}

UpsampleWeights nearest_upsample_weights(int coarse_rows, int coarse_cols, int factor) {
  UpsampleWeights out;
  out.factor = factor;
  std::array<double, 9> center{};
  center[4] = 1.0;
  out.weights = Grid<std::array<double, 9>>(coarse_rows * factor, coarse_cols * factor, center);
  return out;
}

Se3Field upsample_se3(const Se3Field& coarse, const UpsampleWeights& weights) {
  weights.validate();
  const int f = weights.factor;
  if (weights.weights.rows() != coarse.rows() * f || weights.weights.cols() != coarse.cols() * f) {
    throw Error(ErrorCode::kShapeMismatch, "upsampling weights vs coarse field");
  }
  const Grid<Twist> twists = twist_field(coarse);
  Se3Field fine(coarse.rows() * f, coarse.cols() * f, std::max(1, coarse.scale / f));

  for (int R = 0; R < fine.rows(); ++R) {
    const int r = R / f;
    for (int C = 0; C < fine.cols(); ++C) {
      const int c = C / f;
      const auto& w = weights.weights(R, C);
      Twist blended = Twist::Zero();
      const Se3Transform* shared = nullptr;
      bool all_same = true;
      for (int k = 0; k < 9; ++k) {
        if (w[k] == 0.0) continue;
        const int rr = std::clamp(r + k / 3 - 1, 0, coarse.rows() - 1);
        const int cc = std::clamp(c + k % 3 - 1, 0, coarse.cols() - 1);
        blended += w[k] * twists(rr, cc);
        if (shared == nullptr) {
          shared = &coarse(rr, cc);
        } else if (!(*shared == coarse(rr, cc))) {
          all_same = false;
        }
      }
      // A convex combination of one repeated transform is that transform.
      fine(R, C) = (all_same && shared != nullptr) ? *shared : exp(blended);
    }
  }
  return fine;
}

Se3Field downsample_nearest(const Se3Field& fine, int factor) {
  if (factor < 1) {
    throw Error(ErrorCode::kInvalidArgument, "downsampling factor must be >= 1");
  }
  const int rows = (fine.rows() + factor - 1) / factor;
  const int cols = (fine.cols() + factor - 1) / factor;
  Se3Field out(rows, cols, fine.scale * factor);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out(r, c) = fine(r * factor, c * factor);
    }
  }
  return out;
}

namespace {

double mean_abs_depth_residual(const Se3Field& T, const InverseDepthMap& depth1,
                               const InverseDepthMap& depth2, const PinholeIntrinsics& K) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < T.rows(); ++r) {
    for (int c = 0; c < T.cols(); ++c) {
      if (!depth1.is_valid(r, c)) continue;
      const auto res = depth_residual(pixel_at(depth1, r, c), T(r, c), K, depth2);
      if (!res) continue;
      sum += std::abs(*res);
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace

SolveResult solve_scene(const InverseDepthMap& depth1, const InverseDepthMap& depth2,
                        const PinholeIntrinsics& K, SceneOracle& oracle,
                        const SolverOptions& options, const FieldEvaluator& evaluator) {
  K.validate();
  require_same_shape(depth1.values, depth2.values, "frame 1 vs frame 2 inverse depth");
  if (options.iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "iteration count must be >= 0");
  }
  options.neighborhood.validate();

  SolveResult result;
  result.field = Se3Field(depth1.rows(), depth1.cols());
  for (int it = 0; it < options.iterations; ++it) {
    const RevisionBundle rev = oracle.revisions(result.field, it);
    EmbeddingField emb = oracle.embeddings(it);
    if (options.smoothing) {
      emb = smooth(emb, oracle.edge_weights(it));
    }
    StepResult step = dense_se3_step(result.field, emb, rev, depth1, K, options.neighborhood,
                                      options.damping, options.threads);
    result.field = std::move(step.field);

    IterationDiagnostics d;
    d.iteration = it + 1;
    d.objective = step.objective;
    d.mean_update_norm = step.mean_update_norm;
    d.unconstrained = step.unconstrained;
    d.failed = step.failed;
    d.mean_abs_depth_residual = mean_abs_depth_residual(result.field, depth1, depth2, K);
    d.epe3d = evaluator ? evaluator(result.field) : std::numeric_limits<double>::quiet_NaN();
    result.diagnostics.push_back(d);
    if (options.keep_history) {
      result.history.push_back(result.field);
    }
  }
  return result;
}

void LossParams::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0, 1]");
  }
}

double flow_l1(const FlowField3& a, const FlowField3& b) {
  require_same_shape(a.values, b.values, "flow fields");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (!a.valid[i] || !b.valid[i]) continue;
    sum += (a.values[i] - b.values[i]).lpNorm<1>();
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::kEmptyMask, "no pixel is valid in both flow fields");
  }
  return sum / static_cast<double>(count);
}

double sequence_loss(std::span<const Se3Field> preds, const FlowField3& gt,
                     const InverseDepthMap& depth1, const PinholeIntrinsics& K,
                     const LossParams& params, std::span<const FlowField3> revised_flows) {
  params.validate();
  if (preds.empty()) {
    throw Error(ErrorCode::kEmptyPredictions, "sequence_loss needs at least one prediction");
  }
  const std::size_t n = preds.size();
  double loss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double weight = std::pow(params.gamma, static_cast<double>(n - 1 - k));
    loss += weight * flow_l1(induced_flow(preds[k], depth1, K), gt);
  }
  if (params.include_revision_loss) {
    const std::size_t m = revised_flows.size();
    for (std::size_t k = 0; k < m; ++k) {
      const double weight = std::pow(params.gamma, static_cast<double>(m - 1 - k));
      loss += params.revision_loss_weight * weight * flow_l1(revised_flows[k], gt);
    }
  }
  return loss;
}

}  // namespace rigidflow
