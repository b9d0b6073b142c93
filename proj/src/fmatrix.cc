#include "rcme/fmatrix.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace rcme {

namespace {

Matrix3 NormalizingSimilarity(const Eigen::Matrix<double, 2, Eigen::Dynamic>& pts) {
  const Vector2 centroid = pts.rowwise().mean();
  const double mean_sq =
      (pts.colwise() - centroid).colwise().squaredNorm().mean();
  if (!(mean_sq > 0.0)) {
    throw Error(ErrorCode::kDegenerateSample,
                "all sample points coincide in one view");
  }
  const double scale = std::sqrt(2.0 / mean_sq);
  Matrix3 T;
  T << scale, 0.0, -scale * centroid.x(), 0.0, scale, -scale * centroid.y(),
      0.0, 0.0, 1.0;
  return T;
}

// Least-squares ray depths in normalized camera coordinates with P1 = [I|0],
// P2 = [R|t]: minimizes |d1 R a + t - d2 b| and returns the point d1 a on the
// first ray. Returns false for (near) parallel rays.
bool TriangulateNormalized(const Vector3& a, const Vector3& b, const Matrix3& R,
                           const Vector3& t, Vector3* point) {
  const Vector3 r = R * a;
  const double rr = r.squaredNorm();
  const double bb = b.squaredNorm();
  const double rb = r.dot(b);
  const double det = rr * bb - rb * rb;
  if (!(det > 1e-12 * rr * bb)) return false;
  const double d1 = (rb * b.dot(t) - bb * r.dot(t)) / det;
  *point = d1 * a;
  return true;
}

}  // namespace

NormalizationTransform NormalizationTransform::FromSamples(
    std::span<const Correspondence> samples) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> p1(2, samples.size());
  Eigen::Matrix<double, 2, Eigen::Dynamic> p2(2, samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    p1.col(i) = samples[i].x;
    p2.col(i) = samples[i].xp;
  }
  NormalizationTransform transform;
  transform.T1 = NormalizingSimilarity(p1);
  transform.T2 = NormalizingSimilarity(p2);
  return transform;
}

Vector9 EstimateF8Point(std::span<const Correspondence> samples) {
  if (samples.size() != kMinimalSampleSize) {
    throw Error(ErrorCode::kInvalidArgument,
                "the 8-point method needs exactly 8 correspondences");
  }
  const NormalizationTransform norm = NormalizationTransform::FromSamples(samples);

  Eigen::Matrix<double, 8, 9> design;
  for (int i = 0; i < kMinimalSampleSize; ++i) {
    const Vector3 a = norm.T1 * samples[i].HomogeneousFirst();
    const Vector3 b = norm.T2 * samples[i].HomogeneousSecond();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) design(i, 3 * r + c) = b(r) * a(c);
    }
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(7) >= 1e-9 * sv(0))) {
    throw Error(ErrorCode::kDegenerateSample,
                "8-point design matrix has a multi-dimensional null space");
  }
  const Vector9 f_norm = svd.matrixV().col(8);

  Eigen::JacobiSVD<Matrix3> svd_f(FromRowMajor(f_norm),
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector3 s = svd_f.singularValues();
  s(2) = 0.0;
  const Matrix3 F_rank2 =
      svd_f.matrixU() * s.asDiagonal() * svd_f.matrixV().transpose();

  const Matrix3 F = norm.T2.transpose() * F_rank2 * norm.T1;
  Vector9 f = RowMajor(F);
  f.normalize();
  return f;
}

SampsonCorrection ComputeSampsonCorrection(const Correspondence& corr,
                                           const Matrix3& F,
                                           bool with_jacobians) {
  const Vector3 x = corr.HomogeneousFirst();
  const Vector3 xp = corr.HomogeneousSecond();
  const Vector3 Ftxp = F.transpose() * xp;
  const Vector3 Fx = F * x;

  SampsonCorrection out;
  out.epsilon = xp.dot(Fx);
  const Vector4 u(Ftxp(0), Ftxp(1), Fx(0), Fx(1));
  const double s = u.squaredNorm();
  out.gradient_norm2 = s;
  if (!(s >= 1e-15 * F.squaredNorm())) {
    throw Error(ErrorCode::kEpipoleDegenerate,
                "correspondence lies at both epipoles");
  }
  const double e = out.epsilon;
  out.delta = u * (e / s);
  if (!with_jacobians) return out;

  // u = H X + g with H = [0 F2^T; F2 0], F2 the upper-left 2x2 block.
  Matrix4 H = Matrix4::Zero();
  H.block<2, 2>(0, 2) = F.block<2, 2>(0, 0).transpose();
  H.block<2, 2>(2, 0) = F.block<2, 2>(0, 0);
  const Vector4 Hu = H * u;
  out.d_delta_d_x = H * (e / s) + u * u.transpose() / s -
                    u * Hu.transpose() * (2.0 * e / (s * s));

  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Vector4 du = Vector4::Zero();
      if (j < 2) du(j) = xp(i);
      if (i < 2) du(2 + i) = x(j);
      const double de = xp(i) * x(j);
      const double ds = 2.0 * u.dot(du);
      out.d_delta_d_f.col(3 * i + j) =
          (du * e + u * de) / s - u * (e * ds / (s * s));
    }
  }
  return out;
}

double SampsonDistanceSquared(const Correspondence& corr, const Matrix3& F) {
  const Vector3 x = corr.HomogeneousFirst();
  const Vector3 xp = corr.HomogeneousSecond();
  const Vector3 Ftxp = F.transpose() * xp;
  const Vector3 Fx = F * x;
  const double s = Ftxp.head<2>().squaredNorm() + Fx.head<2>().squaredNorm();
  if (!(s >= 1e-15 * F.squaredNorm())) {
    return std::numeric_limits<double>::infinity();
  }
  const double e = xp.dot(Fx);
  return e * e / s;
}

OmegaJacobianMatrix OmegaJacobian(std::span<const Correspondence> samples,
                                  const Vector9& f) {
  const Matrix3 F = FromRowMajor(f);
  OmegaJacobianMatrix J(4 * samples.size(), 9);
  for (size_t k = 0; k < samples.size(); ++k) {
    J.block<4, 9>(4 * k, 0) = -ComputeSampsonCorrection(samples[k], F).d_delta_d_f;
  }
  return J;
}

Eigen::Matrix<double, 9, 8> HouseholderComplement(const Vector9& f) {
  const Vector9 unit = f.normalized();
  Vector9 v = unit;
  v(8) += unit(8) >= 0.0 ? 1.0 : -1.0;
  const Matrix9 H = Matrix9::Identity() - 2.0 * v * v.transpose() / v.squaredNorm();
  return H.leftCols<8>();
}

Matrix9 CovFOverdetermined(std::span<const Correspondence> samples,
                           const Vector9& f, const NoiseModel& noise) {
  const OmegaJacobianMatrix J = OmegaJacobian(samples, f);
  const Matrix9 information = J.transpose() * J / noise.Variance();
  const Eigen::Matrix<double, 9, 8> A = HouseholderComplement(f);
  Eigen::Matrix<double, 8, 8> inner = A.transpose() * information * A;
  inner = 0.5 * (inner + inner.transpose()).eval();

  // Pixel-coordinate entries of f differ by many orders of magnitude; the
  // rank test runs on the Jacobi-scaled matrix.
  const Eigen::Matrix<double, 8, 1> scale = inner.diagonal().cwiseSqrt();
  if (!(scale.minCoeff() > 0.0)) {
    throw Error(ErrorCode::kSingularCovariance,
                "sample geometry leaves the f information matrix singular");
  }
  const Eigen::Matrix<double, 8, 8> scaled =
      scale.cwiseInverse().asDiagonal() * inner * scale.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> eig(scaled);
  const auto& lambda = eig.eigenvalues();
  if (!(lambda(0) > 1e-12 * lambda(7))) {
    throw Error(ErrorCode::kSingularCovariance,
                "sample geometry leaves the f information matrix singular");
  }
  const Eigen::Matrix<double, 8, 8> inner_inv =
      scale.cwiseInverse().asDiagonal() *
      (eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() *
       eig.eigenvectors().transpose()) *
      scale.cwiseInverse().asDiagonal();
  Matrix9 cov = A * inner_inv * A.transpose();
  return 0.5 * (cov + cov.transpose());
}

DecompositionCandidates EssentialHypotheses(
    const Vector9& f, const Intrinsics& K,
    std::span<const Correspondence> samples) {
  const Matrix3 k = K.K();
  const Matrix3 E = k.transpose() * FromRowMajor(f) * k;
  Eigen::JacobiSVD<Matrix3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 U = svd.matrixU();
  Matrix3 V = svd.matrixV();
  // Flipping the third singular vector leaves E unchanged (sigma_3 = 0).
  if (U.determinant() < 0.0) U.col(2) *= -1.0;
  if (V.determinant() < 0.0) V.col(2) *= -1.0;

  Matrix3 W;
  W << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Matrix3 Ra = U * W * V.transpose();
  const Matrix3 Rb = U * W.transpose() * V.transpose();
  const Vector3 u3 = U.col(2);

  DecompositionCandidates out;
  out.hypotheses[0] = {Ra, u3, 0};
  out.hypotheses[1] = {Ra, -u3, 0};
  out.hypotheses[2] = {Rb, u3, 0};
  out.hypotheses[3] = {Rb, -u3, 0};

  const Matrix3 k_inv = K.KInverse();
  for (const Correspondence& corr : samples) {
    const Vector3 a = k_inv * corr.HomogeneousFirst();
    const Vector3 b = k_inv * corr.HomogeneousSecond();
    for (MotionHypothesis& h : out.hypotheses) {
      Vector3 X;
      if (!TriangulateNormalized(a, b, h.R, h.t, &X)) continue;
      if (X.z() > 0.0 && (h.R * X + h.t).z() > 0.0) ++h.votes;
    }
  }

  int best = 0;
  for (int i = 1; i < 4; ++i) {
    if (out.hypotheses[i].votes > out.hypotheses[best].votes) best = i;
  }
  out.selected = best;
  for (int i = 0; i < 4; ++i) {
    if (i != best && out.hypotheses[i].votes == out.hypotheses[best].votes) {
      out.selected = -1;
    }
  }
  return out;
}

Decomposition DecomposeToMotion(const Vector9& f, const Intrinsics& K,
                                std::span<const Correspondence> samples) {
  DecompositionCandidates candidates = EssentialHypotheses(f, K, samples);
  if (candidates.selected < 0) {
    throw Error(ErrorCode::kCheiralityTie,
                "no essential decomposition has a strict cheirality majority");
  }
  const MotionHypothesis& h = candidates.hypotheses[candidates.selected];
  return Decomposition{CameraMotion(h.R, h.t), candidates};
}

ThetaJacobians ThetaJacobian(const Vector9& f, const Vector4& q,
                             const Vector3& t, const Intrinsics& K) {
  const Matrix3 k = K.K();
  // vec(K^T F K) = L f.
  Matrix9 L;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 3; ++c) {
        for (int d = 0; d < 3; ++d) L(3 * a + b, 3 * c + d) = k(c, a) * k(d, b);
      }
    }
  }
  const Vector9 m = L * f;
  const Matrix3 R = QuaternionToRotation(q);
  const Matrix3 tx = Skew(t);
  const Vector9 b = RowMajor(tx * R);
  const double mm = m.squaredNorm();
  const double s = m.dot(b) / mm;

  ThetaJacobians out;
  const Vector9 ds_dm = (b - 2.0 * s * m) / mm;
  out.d_f = (s * Matrix9::Identity() + m * ds_dm.transpose()) * L;

  Matrix9x7 db_dp;
  const std::array<Matrix3, 4> dR = QuaternionToRotationDerivatives(q);
  for (int i = 0; i < 4; ++i) db_dp.col(i) = RowMajor(tx * dR[i]);
  for (int i = 0; i < 3; ++i) db_dp.col(4 + i) = RowMajor(Skew(Vector3::Unit(i)) * R);
  out.d_p = (m * m.transpose() / mm - Matrix9::Identity()) * db_dp;
  return out;
}

Matrix7x9 MotionJacobian(const Vector9& f, const Vector4& q, const Vector3& t,
                         const Intrinsics& K) {
  const ThetaJacobians theta = ThetaJacobian(f, q, t, K);

  // Orthonormal basis of the gauge tangent {dq _|_ q, dt _|_ t}.
  Eigen::Matrix<double, 7, 2> gauge = Eigen::Matrix<double, 7, 2>::Zero();
  gauge.col(0).head<4>() = q.normalized();
  gauge.col(1).tail<3>() = t.normalized();
  Eigen::JacobiSVD<Eigen::Matrix<double, 7, 2>> gauge_svd(gauge, Eigen::ComputeFullU);
  const Eigen::Matrix<double, 7, 5> B = gauge_svd.matrixU().rightCols<5>();

  const Eigen::Matrix<double, 9, 5> reduced = theta.d_p * B;
  Eigen::JacobiSVD<Eigen::Matrix<double, 9, 5>> svd(
      reduced, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(4) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::kRankDeficientJacobian,
                "dTheta/dp is rank deficient beyond the gauge directions");
  }
  const Eigen::Matrix<double, 5, 9> pinv =
      svd.matrixV() * sv.cwiseInverse().asDiagonal() *
      svd.matrixU().leftCols<5>().transpose();
  return -B * pinv * theta.d_f;
}

Matrix7 CovP(const Vector9& f, const Matrix9& cov_f, const Vector4& q,
             const Vector3& t, const Intrinsics& K) {
  const Matrix7x9 J = MotionJacobian(f, q, t, K);
  Matrix7 cov = J * cov_f * J.transpose();
  return 0.5 * (cov + cov.transpose());
}

Matrix9x7 FundamentalMotionJacobian(const Vector4& q, const Vector3& t,
                                    const Intrinsics& K) {
  const Matrix3 k_inv = K.KInverse();
  const Matrix3 k_inv_t = k_inv.transpose();
  const Matrix3 R = QuaternionToRotation(q);
  const Matrix3 tx = Skew(t);
  const std::array<Matrix3, 4> dR = QuaternionToRotationDerivatives(q);
  Matrix9x7 J;
  for (int i = 0; i < 4; ++i) J.col(i) = RowMajor(k_inv_t * tx * dR[i] * k_inv);
  for (int i = 0; i < 3; ++i) {
    J.col(4 + i) = RowMajor(k_inv_t * Skew(Vector3::Unit(i)) * R * k_inv);
  }
  return J;
}

SampsonEvaluator::SampsonEvaluator(const CameraMotion& motion,
                                   const Intrinsics& K, const NoiseModel& noise)
    : variance_(noise.Variance()) {
  const Matrix3 k_inv = K.KInverse();
  F_ = k_inv.transpose() * Skew(motion.t) * motion.R() * k_inv;
  d_f_d_p_ = FundamentalMotionJacobian(motion.q, motion.t, K);
  cov_f_ = d_f_d_p_ * motion.cov_p * d_f_d_p_.transpose();
}

Matrix4x7 SampsonEvaluator::MotionJacobianAt(const Correspondence& corr) const {
  return ComputeSampsonCorrection(corr, F_).d_delta_d_f.lazyProduct(d_f_d_p_);
}

SampsonResidual SampsonEvaluator::Evaluate(const Correspondence& corr) const {
  const SampsonCorrection c = ComputeSampsonCorrection(corr, F_);
  const Matrix4x9 J_f_cov = c.d_delta_d_f.lazyProduct(cov_f_);

  SampsonResidual out;
  out.delta = c.delta;
  Matrix4 cov = variance_ * c.d_delta_d_x.lazyProduct(c.d_delta_d_x.transpose()) +
                J_f_cov.lazyProduct(c.d_delta_d_f.transpose());
  out.cov_delta = 0.5 * (cov + cov.transpose());

  // Directions with variance below 1e-12 of the total carry no information
  // in double precision; a ridge of that size keeps the solve and the
  // log-determinant finite.
  const double trace = out.cov_delta.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) {
    out.mahal = out.delta.isZero(0.0) ? 0.0 : std::numeric_limits<double>::infinity();
    out.log_det = -std::numeric_limits<double>::infinity();
    return out;
  }
  const Eigen::LLT<Matrix4> llt(out.cov_delta + 1e-12 * trace * Matrix4::Identity());
  out.mahal = llt.matrixL().solve(out.delta).squaredNorm();
  out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return out;
}

SampsonResidual ComputeSampsonResidual(const Correspondence& corr,
                                       const CameraMotion& motion,
                                       const Intrinsics& K,
                                       const NoiseModel& noise) {
  return SampsonEvaluator(motion, K, noise).Evaluate(corr);
}

}  // namespace rcme
