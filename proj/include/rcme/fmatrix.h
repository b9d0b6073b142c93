#pragma once

#include <array>
#include <span>

#include <Eigen/Core>

#include "rcme/types.h"

namespace rcme {

constexpr int kMinimalSampleSize = 8;

using Matrix4x7 = Eigen::Matrix<double, 4, 7>;
using Matrix4x9 = Eigen::Matrix<double, 4, 9>;
using Matrix7x9 = Eigen::Matrix<double, 7, 9>;
using Matrix9x7 = Eigen::Matrix<double, 9, 7>;
using OmegaJacobianMatrix = Eigen::Matrix<double, Eigen::Dynamic, 9>;

// Similarity transforms moving each view's centroid to the origin with RMS
// distance sqrt(2).
struct NormalizationTransform {
  Matrix3 T1 = Matrix3::Identity();
  Matrix3 T2 = Matrix3::Identity();

  static NormalizationTransform FromSamples(
      std::span<const Correspondence> samples);
};

// Normalized 8-point estimate with rank 2 enforced, ||f|| = 1.
// Throws kDegenerateSample when the design matrix has a null space of
// dimension two or more.
Vector9 EstimateF8Point(std::span<const Correspondence> samples);

// Sampson correction delta = J_e^T (J_e J_e^T)^-1 eps of one correspondence
// against F, with its derivatives.
struct SampsonCorrection {
  Vector4 delta = Vector4::Zero();
  double epsilon = 0.0;
  // J_e J_e^T.
  double gradient_norm2 = 0.0;
  Matrix4 d_delta_d_x = Matrix4::Zero();
  // With respect to the row-major entries of F.
  Matrix4x9 d_delta_d_f = Matrix4x9::Zero();
};

// Throws kEpipoleDegenerate when J_e J_e^T < 1e-15 (relative to |F|^2).
SampsonCorrection ComputeSampsonCorrection(const Correspondence& corr,
                                           const Matrix3& F,
                                           bool with_jacobians = true);

// First-order squared distance eps^2 / (J_e J_e^T). Returns +inf at the
// epipoles.
double SampsonDistanceSquared(const Correspondence& corr, const Matrix3& F);

// d Omega / d f for Omega(f) = stacked X_k - delta_k(f), 4m x 9.
OmegaJacobianMatrix OmegaJacobian(std::span<const Correspondence> samples,
                                  const Vector9& f);

// Columns 0..7 of the Householder reflector of f; orthogonal to f.
Eigen::Matrix<double, 9, 8> HouseholderComplement(const Vector9& f);

// Sigma_f = A (A^T (J^T Sigma_X^-1 J) A)^-1 A^T.
// Throws kSingularCovariance when the inner 8x8 matrix is singular.
Matrix9 CovFOverdetermined(std::span<const Correspondence> samples,
                           const Vector9& f, const NoiseModel& noise);

struct MotionHypothesis {
  Matrix3 R = Matrix3::Identity();
  Vector3 t = Vector3::Zero();
  int votes = 0;
};

struct DecompositionCandidates {
  std::array<MotionHypothesis, 4> hypotheses;
  int selected = -1;
};

struct Decomposition {
  CameraMotion motion;
  DecompositionCandidates candidates;
};

// Essential matrix factorization with cheirality selection over the samples.
// Throws kCheiralityTie when the best vote count is shared.
Decomposition DecomposeToMotion(const Vector9& f, const Intrinsics& K,
                                std::span<const Correspondence> samples);

// Cheirality votes of every (R, t) hypothesis of E = K^T F K.
DecompositionCandidates EssentialHypotheses(
    const Vector9& f, const Intrinsics& K,
    std::span<const Correspondence> samples);

struct ThetaJacobians {
  Matrix9 d_f = Matrix9::Zero();
  Matrix9x7 d_p = Matrix9x7::Zero();
};

// Analytic partials of the row-major vectorized theta residual.
ThetaJacobians ThetaJacobian(const Vector9& f, const Vector4& q,
                             const Vector3& t, const Intrinsics& K);

// J_p = -(dTheta/dp)^+ dTheta/df, with the pseudo-inverse taken on the
// tangent of the gauge (dq orthogonal to q, dt orthogonal to t).
// Throws kRankDeficientJacobian when dTheta/dp loses rank beyond the two
// gauge directions.
Matrix7x9 MotionJacobian(const Vector9& f, const Vector4& q, const Vector3& t,
                         const Intrinsics& K);

Matrix7 CovP(const Vector9& f, const Matrix9& cov_f, const Vector4& q,
             const Vector3& t, const Intrinsics& K);

// Derivative of the row-major K^-T [t]x R(q) K^-1 with respect to p.
Matrix9x7 FundamentalMotionJacobian(const Vector4& q, const Vector3& t,
                                    const Intrinsics& K);

// Sampson residuals of many correspondences against one motion. Caches the
// motion-dependent quantities.
class SampsonEvaluator {
 public:
  SampsonEvaluator(const CameraMotion& motion, const Intrinsics& K,
                   const NoiseModel& noise);

  // Throws kEpipoleDegenerate (see ComputeSampsonCorrection).
  SampsonResidual Evaluate(const Correspondence& corr) const;

  // J_{delta,p} of one correspondence.
  Matrix4x7 MotionJacobianAt(const Correspondence& corr) const;

  const Matrix3& F() const { return F_; }

 private:
  Matrix3 F_;
  Matrix9x7 d_f_d_p_;
  // Motion covariance pushed to the entries of F.
  Matrix9 cov_f_;
  double variance_;
};

SampsonResidual ComputeSampsonResidual(const Correspondence& corr,
                                       const CameraMotion& motion,
                                       const Intrinsics& K,
                                       const NoiseModel& noise);

}  // namespace rcme
