#include "rigidflow/verify.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

namespace rigidflow::verify {

namespace {

CheckResult make_result(std::string name, double error, double tolerance, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.error = error;
  r.tolerance = tolerance;
  r.passed = std::isfinite(error) && error < tolerance;
  r.detail = std::move(detail);
  return r;
}

Vector3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector3 v;
  do {
    v = Vector3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Plain-matrix projection used by the reference paths.
bool project_manual(const Vector3& P, const PinholeIntrinsics& K, Vector3& out) {
  if (!(P.z() > kMinDepth)) return false;
  out = Vector3(K.fx * P.x() / P.z() + K.cx, K.fy * P.y() / P.z() + K.cy, 1.0 / P.z());
  return true;
}

Vector3 apply(const Matrix4& M, const Vector3& X) {
  return M.topLeftCorner<3, 3>() * X + M.topRightCorner<3, 1>();
}

}  // namespace

Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(k) += h;
    xm(k) -= h;
    J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

Eigen::Matrix<double, 3, 6> expanded_mapping_jacobian(const Vector3& P, const PinholeIntrinsics& K) {
  const double X = P.x();
  const double Y = P.y();
  const double d = 1.0 / P.z();
  const double d2 = d * d;
  Eigen::Matrix<double, 3, 6> J;
  // clang-format off
  J << K.fx * d, 0.0, -K.fx * X * d2, -K.fx * X * Y * d2, K.fx * (1.0 + X * X * d2), -K.fx * Y * d,
       0.0, K.fy * d, -K.fy * Y * d2, -K.fy * (1.0 + Y * Y * d2), K.fy * X * Y * d2, K.fy * X * d,
       0.0, 0.0, -d2, -Y * d2, X * d2, 0.0;
  // clang-format on
  return J;
}

Grid<NormalSystem6> brute_force_normal_equations(const Se3Field& T,
                                                 const EmbeddingField& embeddings,
                                                 const RevisionBundle& rev,
                                                 const InverseDepthMap& depth1,
                                                 const PinholeIntrinsics& K,
                                                 const Neighborhood& nbhd) {
  const int rows = T.rows();
  const int cols = T.cols();
  Grid<NormalSystem6> out(rows, cols);

  for (int ri = 0; ri < rows; ++ri) {
    for (int ci = 0; ci < cols; ++ci) {
      const Matrix4 Mi = T(ri, ci).matrix();
      std::vector<Eigen::Matrix<double, 3, 6>> jac;
      std::vector<Vector3> res;
      std::vector<Vector3> wts;
      for (int rj = 0; rj < rows; ++rj) {
        for (int cj = 0; cj < cols; ++cj) {
          const int dr = rj - ri;
          const int dc = cj - ci;
          if (std::abs(dr) > nbhd.radius || std::abs(dc) > nbhd.radius) continue;
          if (dr % nbhd.stride != 0 || dc % nbhd.stride != 0) continue;
          if (!depth1.is_valid(rj, cj)) continue;
          const double z = 1.0 / depth1.values(rj, cj);
          const Vector3 Xj((cj - K.cx) / K.fx * z, (rj - K.cy) / K.fy * z, z);
          Vector3 target;
          Vector3 current;
          if (!project_manual(apply(T(rj, cj).matrix(), Xj), K, target)) continue;
          const Vector3 P = apply(Mi, Xj);
          if (!project_manual(P, K, current)) continue;

          const Eigen::RowVectorXd diff = embeddings.vector(ri, ci) - embeddings.vector(rj, cj);
          const double a = 2.0 / (1.0 + std::exp(diff.dot(diff)));
          jac.push_back(expanded_mapping_jacobian(P, K));
          res.push_back(rev.revision(rj, cj) + target - current);
          wts.push_back(a * rev.confidence(rj, cj));
        }
      }

      const Eigen::Index n = static_cast<Eigen::Index>(jac.size());
      Eigen::MatrixXd J(3 * n, 6);
      Eigen::VectorXd r(3 * n);
      Eigen::VectorXd w(3 * n);
      for (Eigen::Index k = 0; k < n; ++k) {
        J.middleRows<3>(3 * k) = jac[static_cast<std::size_t>(k)];
        r.segment<3>(3 * k) = res[static_cast<std::size_t>(k)];
        w.segment<3>(3 * k) = wts[static_cast<std::size_t>(k)];
      }
      const Eigen::MatrixXd Wm = w.asDiagonal();
      NormalSystem6& sys = out(ri, ci);
      sys.H = J.transpose() * Wm * J;
      sys.b = J.transpose() * Wm * r;
      sys.total_weight = w.sum();
      sys.energy = r.dot(Wm * r);
      sys.constrained = sys.total_weight >= kMinTotalWeight;
      if (!sys.constrained) {
        sys.H.setZero();
        sys.b.setZero();
      }
    }
  }
  return out;
}

Twist random_twist(std::mt19937_64& rng, double max_angle, double translation_sigma) {
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  std::normal_distribution<double> n(0.0, translation_sigma);
  return make_twist(Vector3(n(rng), n(rng), n(rng)), angle(rng) * random_unit(rng));
}

Se3Transform random_transform(std::mt19937_64& rng, double max_angle, double max_translation) {
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  const Eigen::AngleAxisd aa(angle(rng), random_unit(rng));
  return Se3Transform(Eigen::Quaterniond(aa), Vector3(u(rng), u(rng), u(rng)));
}

RandomProblem random_problem(std::mt19937_64& rng, int rows, int cols, int channels) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  RandomProblem p;
  p.K = PinholeIntrinsics{static_cast<double>(cols), static_cast<double>(cols),
                          0.5 * (cols - 1), 0.5 * (rows - 1)};
  p.field = Se3Field(rows, cols);
  p.embeddings = EmbeddingField(rows, cols, channels);
  p.revisions = RevisionBundle(rows, cols);
  Grid<double> inv(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      p.field(r, c) = random_transform(rng, 0.2, 0.1);
      for (int k = 0; k < channels; ++k) p.embeddings.data(p.embeddings.pixel(r, c), k) = 0.7 * normal(rng);
      p.revisions.revision(r, c) = Vector3(normal(rng), normal(rng), 0.05 * normal(rng));
      Vector3 w(unit(rng), unit(rng), unit(rng));
      if (unit(rng) < 0.2) w.setZero();
      p.revisions.confidence(r, c) = w;
      inv(r, c) = unit(rng) < 0.05 ? 0.0 : 0.2 + 0.8 * unit(rng);
    }
  }
  p.depth1 = InverseDepthMap::from_values(std::move(inv));
  return p;
}

CheckResult check_exp_log_roundtrip(std::uint64_t seed, int samples) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Twist xi = random_twist(rng, std::numbers::pi - 1e-3, 1.0);
    worst = std::max(worst, (log(exp(xi)) - xi).cwiseAbs().maxCoeff());
    const Se3Transform T = random_transform(rng, std::numbers::pi - 1e-3, 2.0);
    const Se3Transform back = exp(log(T));
    worst = std::max(worst, (back.matrix() - T.matrix()).cwiseAbs().maxCoeff());
  }
  return make_result("exp/log roundtrip", worst, 1e-9, std::to_string(samples) + " samples");
}

CheckResult check_group_axioms(std::uint64_t seed, int samples) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const Se3Transform I = Se3Transform::identity();
  for (int i = 0; i < samples; ++i) {
    const Se3Transform A = random_transform(rng, std::numbers::pi - 1e-3, 2.0);
    const Se3Transform B = random_transform(rng, std::numbers::pi - 1e-3, 2.0);
    const Se3Transform C = random_transform(rng, std::numbers::pi - 1e-3, 2.0);
    worst = std::max(worst, twist_distance((A * B) * C, A * (B * C)));
    worst = std::max(worst, twist_distance(A * A.inverse(), I));
    worst = std::max(worst, twist_distance(A.inverse() * A, I));
    worst = std::max(worst, twist_distance(A * I, A));
    worst = std::max(worst, twist_distance(I * A, A));
    worst = std::max(worst, std::abs(A.rotation().norm() - 1.0) * 1e2);
  }
  return make_result("group axioms", worst, 1e-10, std::to_string(samples) + " triples");
}

CheckResult check_mapping_jacobian(std::uint64_t seed, int samples) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int done = 0;
  while (done < samples) {
    const Se3Transform T = random_transform(rng, 0.5, 0.5);
    const PinholeIntrinsics K{50.0 + 450.0 * u(rng), 50.0 + 450.0 * u(rng), 100.0 * u(rng),
                              100.0 * u(rng)};
    const Vector3 X(-1.0 + 2.0 * u(rng), -1.0 + 2.0 * u(rng), 1.0 + 4.0 * u(rng));
    const Vector3 P = T.act(X);
    if (!(P.z() > 0.5)) continue;
    const auto mapped = [&](const Eigen::VectorXd& delta) -> Eigen::VectorXd {
      Vector3 out;
      project_manual(apply(exp(Twist(delta)).matrix() * T.matrix(), X), K, out);
      return out;
    };
    const Eigen::MatrixXd numeric = central_difference(mapped, Eigen::VectorXd::Zero(6), 1e-6);
    worst = std::max(worst, relative_error(mapping_jacobian(P, K), numeric));
    ++done;
  }
  return make_result("mapping Jacobian vs finite differences", worst, 1e-5,
                     std::to_string(samples) + " random (T, X, K)");
}

CheckResult check_normal_equations(std::uint64_t seed, int rows, int cols, int radius,
                                   int stride) {
  std::mt19937_64 rng(seed);
  const RandomProblem p = random_problem(rng, rows, cols, 3);
  const Neighborhood nbhd{radius, stride};
  const auto fast = build_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, nbhd);
  const auto slow = brute_force_normal_equations(p.field, p.embeddings, p.revisions, p.depth1, p.K, nbhd);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) {
    worst = std::max(worst, (fast[i].H - slow[i].H).cwiseAbs().maxCoeff());
    worst = std::max(worst, (fast[i].b - slow[i].b).cwiseAbs().maxCoeff());
    scale = std::max({scale, slow[i].H.cwiseAbs().maxCoeff(), slow[i].b.cwiseAbs().maxCoeff()});
    if (fast[i].constrained != slow[i].constrained) worst = 1.0;
  }
  std::ostringstream detail;
  detail << rows << "x" << cols << " radius " << radius << " stride " << stride
         << ", largest entry " << scale;
  return make_result("normal equations vs dense oracle", worst, 1e-10, detail.str());
}

CheckResult check_linear_solve_adjoint(std::uint64_t seed, int size) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd M(size, size);
  for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = n(rng);
  const Eigen::MatrixXd H = M * M.transpose() + size * Eigen::MatrixXd::Identity(size, size);
  Eigen::VectorXd b(size), g(size);
  for (int i = 0; i < size; ++i) {
    b(i) = n(rng);
    g(i) = n(rng);
  }
  const Eigen::VectorXd u = H.partialPivLu().solve(b);
  const LinearSolveGradients grads = linear_solve_adjoint(H, u, g);

  // L(H, b) = g^T H^-1 b, every entry of H perturbed independently.
  const auto loss_b = [&](const Eigen::VectorXd& bb) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, g.dot(H.partialPivLu().solve(bb)));
  };
  const auto loss_H = [&](const Eigen::VectorXd& hh) -> Eigen::VectorXd {
    const Eigen::MatrixXd Hp = Eigen::Map<const Eigen::MatrixXd>(hh.data(), size, size);
    return Eigen::VectorXd::Constant(1, g.dot(Hp.partialPivLu().solve(b)));
  };
  const Eigen::MatrixXd num_b = central_difference(loss_b, b, 1e-6).transpose();
  const Eigen::VectorXd h_flat = Eigen::Map<const Eigen::VectorXd>(H.data(), H.size());
  const Eigen::MatrixXd num_H_flat = central_difference(loss_H, h_flat, 1e-6);
  const Eigen::MatrixXd num_H = Eigen::Map<const Eigen::MatrixXd>(num_H_flat.data(), size, size);
  const double err = std::max(relative_error(grads.grad_b, num_b),
                              relative_error(grads.grad_H, num_H));
  return make_result("linear solve adjoint vs finite differences", err, 1e-5,
                     std::to_string(size) + "x" + std::to_string(size) + " SPD");
}

namespace {

EdgeWeights random_weights(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  EdgeWeights w(rows, cols);
  for (std::size_t i = 0; i < w.wx.size(); ++i) {
    w.wx[i] = u(rng);
    w.wy[i] = u(rng);
  }
  return w;
}

EmbeddingField random_embedding(std::mt19937_64& rng, int rows, int cols, int channels) {
  std::normal_distribution<double> n(0.0, 1.0);
  EmbeddingField f(rows, cols, channels);
  for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data(i) = n(rng);
  return f;
}

}  // namespace

CheckResult check_bilap_residual(std::uint64_t seed, int rows, int cols) {
  std::mt19937_64 rng(seed);
  const EdgeWeights w = random_weights(rng, rows, cols);
  const EmbeddingField v = random_embedding(rng, rows, cols, 1);
  const BilapSystem sys = build_system(w);
  const EmbeddingField u = smooth(v, *factorize(sys));
  const Eigen::VectorXd resid = sys.A * u.data.col(0) - v.data.col(0);
  const double rel = resid.cwiseAbs().maxCoeff() / v.data.cwiseAbs().maxCoeff();
  return make_result("bi-Laplacian solve residual", rel, 1e-8,
                     std::to_string(rows) + "x" + std::to_string(cols) + ", relative to ||v||_inf");
}

CheckResult check_bilap_gradients(std::uint64_t seed, int rows, int cols, int channels) {
  std::mt19937_64 rng(seed);
  const EdgeWeights w = random_weights(rng, rows, cols);
  const EmbeddingField v = random_embedding(rng, rows, cols, channels);
  const EmbeddingField g = random_embedding(rng, rows, cols, channels);

  // Reference forward path: dense matrices and a dense LU solve.
  const int n = rows * cols;
  const auto dense_loss = [&](const Eigen::VectorXd& wx, const Eigen::VectorXd& wy,
                              const Eigen::MatrixXd& vv) {
    const Eigen::MatrixXd Dx = Eigen::MatrixXd(difference_x(rows, cols));
    const Eigen::MatrixXd Dy = Eigen::MatrixXd(difference_y(rows, cols));
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + Dx.transpose() * wx.asDiagonal() * Dx +
                              Dy.transpose() * wy.asDiagonal() * Dy;
    return (g.data.array() * A.partialPivLu().solve(vv).array()).sum();
  };
  const Eigen::VectorXd wx0 = Eigen::Map<const Eigen::VectorXd>(w.wx.values().data(), n);
  const Eigen::VectorXd wy0 = Eigen::Map<const Eigen::VectorXd>(w.wy.values().data(), n);
  const Eigen::VectorXd v0 = Eigen::Map<const Eigen::VectorXd>(v.data.data(), v.data.size());

  const double h = 1e-6;
  const auto num_wx = central_difference(
      [&](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, dense_loss(x, wy0, v.data));
      },
      wx0, h);
  const auto num_wy = central_difference(
      [&](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, dense_loss(wx0, x, v.data));
      },
      wy0, h);
  const auto num_v = central_difference(
      [&](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd vv = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, channels);
        return Eigen::VectorXd::Constant(1, dense_loss(wx0, wy0, vv));
      },
      v0, h);

  const auto factor = factorize(build_system(w));
  const EmbeddingField u = smooth(v, *factor);
  const SmoothGradients grads = smooth_backward(u, *factor, g);
  const Eigen::VectorXd gwx = Eigen::Map<const Eigen::VectorXd>(grads.grad_wx.values().data(), n);
  const Eigen::VectorXd gwy = Eigen::Map<const Eigen::VectorXd>(grads.grad_wy.values().data(), n);
  const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(grads.grad_v.data.data(), grads.grad_v.data.size());

  const double e_wx = relative_error(gwx, num_wx.transpose());
  const double e_wy = relative_error(gwy, num_wy.transpose());
  const double e_v = relative_error(gv, num_v.transpose());
  std::ostringstream detail;
  detail << rows << "x" << cols << "x" << channels << " wx " << e_wx << " wy " << e_wy << " v "
         << e_v;
  return make_result("bi-Laplacian gradients vs finite differences",
                     std::max({e_wx, e_wy, e_v}), 1e-4, detail.str());
}

CheckResult check_bilap_channels(std::uint64_t seed, int rows, int cols, int channels) {
  std::mt19937_64 rng(seed);
  const EdgeWeights w = random_weights(rng, rows, cols);
  const EmbeddingField v = random_embedding(rng, rows, cols, channels);
  const auto factor = factorize(build_system(w));
  const EmbeddingField joint = smooth(v, *factor);
  double worst = 0.0;
  for (int k = 0; k < channels; ++k) {
    const Eigen::VectorXd single = factor->solve(Eigen::VectorXd(v.data.col(k)));
    worst = std::max(worst, (joint.data.col(k) - single).cwiseAbs().maxCoeff());
  }
  // Bitwise agreement is required; any nonzero difference fails.
  return make_result("multi-channel solve equals per-channel solves", worst, 1e-300,
                     std::to_string(channels) + " channels");
}

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  return {
      check_exp_log_roundtrip(seed, 1000),
      check_group_axioms(seed + 1, 1000),
      check_mapping_jacobian(seed + 2, 100),
      check_normal_equations(seed + 3, 8, 8, 3),
      check_normal_equations(seed + 4, 12, 10, 2, 2),
      check_linear_solve_adjoint(seed + 5, 6),
      check_bilap_residual(seed + 6, 32, 32),
      check_bilap_gradients(seed + 7, 8, 8, 2),
      check_bilap_channels(seed + 8, 16, 16, 16),
  };
}

}  // namespace rigidflow::verify
