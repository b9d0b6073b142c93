#include "rcme/refine.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "rcme/stats.h"

namespace rcme {

namespace {

using Matrix2x3 = Eigen::Matrix<double, 2, 3>;
using Matrix2x5 = Eigen::Matrix<double, 2, 5>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;
using Matrix5x3 = Eigen::Matrix<double, 5, 3>;
using Vector5 = Eigen::Matrix<double, 5, 1>;

Vector4 QuaternionProduct(const Vector4& a, const Vector4& b) {
  Vector4 out;
  out << a(0) * b(0) - a.tail<3>().dot(b.tail<3>()),
      a(0) * b.tail<3>() + b(0) * a.tail<3>() + a.tail<3>().cross(b.tail<3>());
  return out;
}

Vector4 QuaternionExp(const Vector3& omega) {
  const double angle = omega.norm();
  Vector4 q;
  if (angle < 1e-12) {
    q << 1.0, 0.5 * omega;
  } else {
    q << std::cos(0.5 * angle), std::sin(0.5 * angle) / angle * omega;
  }
  return q;
}

Eigen::Matrix<double, 3, 2> SphereTangent(const Vector3& t) {
  Eigen::Matrix<double, 3, 2> basis;
  basis.col(0) = t.unitOrthogonal();
  basis.col(1) = t.cross(basis.col(0)).normalized();
  return basis;
}

CameraMotion Retract(const CameraMotion& motion, const Vector5& step) {
  const Vector4 q = QuaternionProduct(QuaternionExp(step.head<3>()), motion.q);
  const Vector3 t = motion.t + SphereTangent(motion.t) * step.tail<2>();
  return CameraMotion(q, t);
}

// Pixel projection of a camera-frame point and its derivative.
Vector2 Project(const Matrix3& K, const Vector3& Xc, Matrix2x3* d_xc) {
  const Vector3 h = K * Xc;
  const double iz = 1.0 / h.z();
  if (d_xc != nullptr) {
    Matrix2x3 d_h;
    d_h << iz, 0.0, -h.x() * iz * iz, 0.0, iz, -h.y() * iz * iz;
    *d_xc = d_h * K;
  }
  return Vector2(h.x() * iz, h.y() * iz);
}

double TotalCost(std::span<const Correspondence> correspondences,
                 std::span<const int> inliers, const std::vector<Vector3>& points,
                 const CameraMotion& motion, const Intrinsics& K) {
  double cost = 0.0;
  for (size_t i = 0; i < inliers.size(); ++i) {
    cost += ReprojectionErrors(correspondences[inliers[i]], points[i], motion, K).sum();
  }
  return cost;
}

std::vector<Vector3> InitialStructure(std::span<const Correspondence> correspondences,
                                      std::span<const int> inliers,
                                      const CameraMotion& motion,
                                      const Intrinsics& K) {
  std::vector<Vector3> points(inliers.size());
  std::vector<bool> valid(inliers.size(), false);
  std::vector<double> depths;
  for (size_t i = 0; i < inliers.size(); ++i) {
    try {
      points[i] = Triangulate(correspondences[inliers[i]], motion, K);
      valid[i] = true;
      depths.push_back(std::abs(points[i].z()));
    } catch (const Error&) {
    }
  }
  double depth = 1.0;
  if (!depths.empty()) {
    std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
    depth = depths[depths.size() / 2];
  }
  const Matrix3 k_inv = K.KInverse();
  for (size_t i = 0; i < inliers.size(); ++i) {
    if (!valid[i]) {
      points[i] = depth * (k_inv * correspondences[inliers[i]].HomogeneousFirst());
    }
  }
  return points;
}

}  // namespace

Vector3 Triangulate(const Correspondence& corr, const CameraMotion& motion,
                    const Intrinsics& K) {
  const Matrix3 k_inv = K.KInverse();
  const Vector3 a = k_inv * corr.HomogeneousFirst();
  const Vector3 b = k_inv * corr.HomogeneousSecond();
  Eigen::Matrix<double, 3, 4> P1 = Eigen::Matrix<double, 3, 4>::Zero();
  P1.leftCols<3>().setIdentity();
  Eigen::Matrix<double, 3, 4> P2;
  P2 << motion.R(), motion.t;

  Matrix4 A;
  A.row(0) = a.x() * P1.row(2) - a.z() * P1.row(0);
  A.row(1) = a.y() * P1.row(2) - a.z() * P1.row(1);
  A.row(2) = b.x() * P2.row(2) - b.z() * P2.row(0);
  A.row(3) = b.y() * P2.row(2) - b.z() * P2.row(1);
  for (int r = 0; r < 4; ++r) {
    const double n = A.row(r).norm();
    if (n > 0.0) A.row(r) /= n;
  }
  Eigen::JacobiSVD<Matrix4> svd(A, Eigen::ComputeFullV);
  const Vector4 sv = svd.singularValues();
  if (!(sv(2) > 1e-12 * sv(0))) {
    throw Error(ErrorCode::kPointAtInfinity, "rays are parallel");
  }
  const Vector4 X = svd.matrixV().col(3);
  if (!(std::abs(X(3)) > 1e-12 * X.head<3>().norm())) {
    throw Error(ErrorCode::kPointAtInfinity, "triangulated point at infinity");
  }
  return X.head<3>() / X(3);
}

Vector2 ReprojectionErrors(const Correspondence& corr, const Vector3& X,
                           const CameraMotion& motion, const Intrinsics& K) {
  const Matrix3 k = K.K();
  const Vector2 r1 = Project(k, X, nullptr) - corr.x;
  const Vector2 r2 = Project(k, motion.R() * X + motion.t, nullptr) - corr.xp;
  return Vector2(r1.squaredNorm(), r2.squaredNorm());
}

MleResult MleRefine(const CameraMotion& motion,
                    std::span<const Correspondence> correspondences,
                    std::span<const int> inliers, const Intrinsics& K,
                    const LmConfig& config) {
  if (inliers.size() < 8) {
    throw Error(ErrorCode::kTooFewCorrespondences,
                "refinement needs at least 8 inliers");
  }
  const int n = static_cast<int>(inliers.size());
  const Matrix3 k = K.K();

  MleResult result;
  result.motion = CameraMotion(motion.q, motion.t);
  result.points3d = InitialStructure(correspondences, inliers, result.motion, K);
  double cost = TotalCost(correspondences, inliers, result.points3d, result.motion, K);
  result.cost_history.push_back(cost);

  std::vector<Matrix5x3> W(n);
  std::vector<Matrix3> V(n);
  std::vector<Vector3> g_point(n);
  double lambda = config.initial_lambda;

  // Residuals at round-off level cannot be improved further.
  const double cost_floor = 4.0 * n * config.residual_floor * config.residual_floor;
  while (result.iterations < config.max_iters && cost > cost_floor) {
    // Normal equations J^T J and -J^T r in Schur-complement blocks.
    const Matrix3 R = result.motion.R();
    const Eigen::Matrix<double, 3, 2> tangent = SphereTangent(result.motion.t);
    Matrix5 U = Matrix5::Zero();
    Vector5 g_cam = Vector5::Zero();
    for (int i = 0; i < n; ++i) {
      const Correspondence& corr = correspondences[inliers[i]];
      const Vector3& X = result.points3d[i];
      Matrix2x3 d1, d2;
      const Vector2 r1 = Project(k, X, &d1) - corr.x;
      const Vector3 Xc = R * X + result.motion.t;
      const Vector2 r2 = Project(k, Xc, &d2) - corr.xp;

      Matrix2x5 A;
      A.leftCols<3>() = -d2 * Skew(R * X);
      A.rightCols<2>() = d2 * tangent;
      const Matrix2x3 B2 = d2 * R;

      U += A.transpose() * A;
      g_cam -= A.transpose() * r2;
      W[i] = A.transpose() * B2;
      V[i] = d1.transpose() * d1 + B2.transpose() * B2;
      g_point[i] = -(d1.transpose() * r1 + B2.transpose() * r2);
    }

    ++result.iterations;

    bool accepted = false;
    while (!accepted && lambda <= config.max_lambda) {
      Matrix5 S = U;
      S.diagonal() *= 1.0 + lambda;
      Vector5 rhs = g_cam;
      std::vector<Matrix3> V_inv(n);
      for (int i = 0; i < n; ++i) {
        Matrix3 Vd = V[i];
        Vd.diagonal() *= 1.0 + lambda;
        V_inv[i] = Vd.inverse();
        const Matrix5x3 WV = W[i] * V_inv[i];
        S -= WV * W[i].transpose();
        rhs -= WV * g_point[i];
      }
      const Vector5 d_cam = S.ldlt().solve(rhs);
      std::vector<Vector3> candidate_points(n);
      bool finite = d_cam.allFinite();
      for (int i = 0; i < n && finite; ++i) {
        candidate_points[i] =
            result.points3d[i] + V_inv[i] * (g_point[i] - W[i].transpose() * d_cam);
        finite = candidate_points[i].allFinite();
      }
      if (finite) {
        const CameraMotion candidate_motion = Retract(result.motion, d_cam);
        const double candidate_cost = TotalCost(correspondences, inliers,
                                                candidate_points, candidate_motion, K);
        if (candidate_cost < cost) {
          const double decrease = (cost - candidate_cost) / cost;
          result.motion = candidate_motion;
          result.points3d = std::move(candidate_points);
          cost = candidate_cost;
          result.cost_history.push_back(cost);
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (decrease < config.epsilon) return result;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
  return result;
}

double HuberRho(double e2, double tau2) {
  if (e2 <= tau2) return e2;
  return 2.0 * std::sqrt(tau2) * std::sqrt(e2) - tau2;
}

double ConsistenceThreshold(const NoiseModel& noise, double alpha) {
  return noise.Variance() * Chi2InvCdf(2, 1.0 - alpha);
}

bool IsFailedRecovery(int n_before, int n_after, double kappa) {
  if (n_before <= 0) return true;
  return static_cast<double>(n_after) / n_before <= kappa;
}

FailureAssessment FailureMetric(const CameraMotion& pre_motion,
                                const CameraMotion& post_motion,
                                std::span<const Correspondence> correspondences,
                                std::span<const int> inliers, const Intrinsics& K,
                                const NoiseModel& noise, double alpha,
                                double kappa) {
  const double tau2 = ConsistenceThreshold(noise, alpha);
  auto count = [&](const CameraMotion& motion) {
    int consistent = 0;
    for (const int index : inliers) {
      const Correspondence& corr = correspondences[index];
      try {
        const Vector3 X = Triangulate(corr, motion, K);
        const double e2 = ReprojectionErrors(corr, X, motion, K).maxCoeff();
        if (HuberRho(e2, tau2) < tau2) ++consistent;
      } catch (const Error&) {
      }
    }
    return consistent;
  };
  FailureAssessment out;
  out.n_before = count(pre_motion);
  out.n_after = count(post_motion);
  out.failed = IsFailedRecovery(out.n_before, out.n_after, kappa);
  return out;
}

RefinedSolution RefineAndAssess(const CameraMotion& motion,
                                std::span<const Correspondence> correspondences,
                                std::span<const int> inliers, const Intrinsics& K,
                                const NoiseModel& noise, double alpha, double kappa,
                                const LmConfig& config) {
  RefinedSolution solution;
  solution.motion = motion;
  if (inliers.size() < 8) {
    const FailureAssessment assessment =
        FailureMetric(motion, motion, correspondences, inliers, K, noise, alpha, kappa);
    solution.n_before = assessment.n_before;
    solution.n_after = assessment.n_after;
    solution.failed = true;
    return solution;
  }
  MleResult mle = MleRefine(motion, correspondences, inliers, K, config);
  const FailureAssessment assessment = FailureMetric(
      motion, mle.motion, correspondences, inliers, K, noise, alpha, kappa);
  solution.motion = mle.motion;
  solution.points3d = std::move(mle.points3d);
  solution.n_before = assessment.n_before;
  solution.n_after = assessment.n_after;
  solution.failed = assessment.failed;
  solution.lm_iterations = mle.iterations;
  return solution;
}

}  // namespace rcme
