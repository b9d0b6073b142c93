#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rcme/error.h"

namespace rcme {

using Vector2 = Eigen::Vector2d;
using Vector3 = Eigen::Vector3d;
using Vector4 = Eigen::Vector4d;
using Vector7 = Eigen::Matrix<double, 7, 1>;
using Vector9 = Eigen::Matrix<double, 9, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix7 = Eigen::Matrix<double, 7, 7>;
using Matrix9 = Eigen::Matrix<double, 9, 9>;

// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  Intrinsics() = default;
  Intrinsics(double fx, double fy, double cx, double cy, double skew = 0.0);

  static Intrinsics Identity() { return Intrinsics(1.0, 1.0, 0.0, 0.0); }

  Matrix3 K() const;
  Matrix3 KInverse() const;
};

// One putative point pair. X = [x; xp] stacks the two pixel positions.
struct Correspondence {
  Vector2 x = Vector2::Zero();
  Vector2 xp = Vector2::Zero();

  Correspondence() = default;
  Correspondence(const Vector2& x, const Vector2& xp);
  explicit Correspondence(const Vector4& stacked);

  Vector4 Stacked() const;
  Vector3 HomogeneousFirst() const { return x.homogeneous(); }
  Vector3 HomogeneousSecond() const { return xp.homogeneous(); }
};

// Isotropic zero-mean Gaussian pixel noise.
struct NoiseModel {
  double sigma = 0.5;

  NoiseModel() = default;
  explicit NoiseModel(double sigma);

  // sigma^2 * I_4.
  Matrix4 CorrespondenceCovariance() const;
  double Variance() const { return sigma * sigma; }
};

// Row-major stacked fundamental matrix with its covariance.
struct FundamentalModel {
  Vector9 f = Vector9::Zero();
  Matrix9 cov_f = Matrix9::Zero();

  Matrix3 F() const;

  // Throws kInvalidArgument when the unit-norm, rank-2 or PSD invariant is
  // violated.
  void Validate() const;
};

// Relative motion of the second camera, p = [q; t] with q = (w, x, y, z).
// Gauges: |q| = 1, q.w >= 0, |t| = 1.
struct CameraMotion {
  Vector4 q = Vector4(1.0, 0.0, 0.0, 0.0);
  Vector3 t = Vector3::UnitX();
  Matrix7 cov_p = Matrix7::Zero();

  CameraMotion() = default;
  CameraMotion(const Vector4& q, const Vector3& t,
               const Matrix7& cov_p = Matrix7::Zero());
  CameraMotion(const Matrix3& R, const Vector3& t,
               const Matrix7& cov_p = Matrix7::Zero());

  Matrix3 R() const;
  Vector7 Stacked() const;

  void Validate() const;
};

struct SampsonResidual {
  Vector4 delta = Vector4::Zero();
  Matrix4 cov_delta = Matrix4::Zero();
  // delta^T cov_delta^-1 delta.
  double mahal = 0.0;
  // log |cov_delta| of the regularized matrix used for mahal.
  double log_det = 0.0;

  // Ratio of the largest to the smallest eigenvalue of cov_delta; +inf when
  // cov_delta is singular.
  double Condition() const;
};

Matrix3 Skew(const Vector3& v);

// Rotation of a quaternion (w, x, y, z). The homogeneous quadratic form is
// used so that R(c q) = c^2 R(q); it is a rotation for unit q.
Matrix3 QuaternionToRotation(const Vector4& q);

// dR/dq_k for k = 0..3 of the quadratic form above.
std::array<Matrix3, 4> QuaternionToRotationDerivatives(const Vector4& q);

// Unit quaternion with non-negative scalar part.
Vector4 RotationToQuaternion(const Matrix3& R);

// Geodesic angle between two rotations in radians.
double RotationAngleBetween(const Matrix3& a, const Matrix3& b);

// Angle between two translation directions, ignoring length.
double DirectionAngleBetween(const Vector3& a, const Vector3& b);

// Row-major 9-vector of a 3x3 matrix and back.
Vector9 RowMajor(const Matrix3& m);
Matrix3 FromRowMajor(const Vector9& v);

// Theta(f, p) = s K^T F K - [t]x R(q), with s the least-squares scale
// <K^T F K, [t]x R>_F / |K^T F K|_F^2.
Matrix3 ThetaResidual(const Vector9& f, const Vector4& q, const Vector3& t,
                      const Intrinsics& K);

// Essential-consistent fundamental matrix K^-T [t]x R K^-1, unit Frobenius
// norm.
Matrix3 FundamentalFromMotion(const Vector4& q, const Vector3& t,
                              const Intrinsics& K);

}  // namespace rcme
