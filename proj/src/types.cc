#include "rcme/types.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace rcme {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
    case ErrorCode::kDegenerateSample:
      return "DegenerateSample";
    case ErrorCode::kCheiralityTie:
      return "CheiralityTie";
    case ErrorCode::kSingularCovariance:
      return "SingularCovariance";
    case ErrorCode::kRankDeficientJacobian:
      return "RankDeficientJacobian";
    case ErrorCode::kEpipoleDegenerate:
      return "EpipoleDegenerate";
    case ErrorCode::kDegenerateCovariance:
      return "DegenerateCovariance";
    case ErrorCode::kInconclusiveTest:
      return "InconclusiveTest";
    case ErrorCode::kPointAtInfinity:
      return "PointAtInfinity";
    case ErrorCode::kTooFewCorrespondences:
      return "TooFewCorrespondences";
    case ErrorCode::kEmptyFrustum:
      return "EmptyFrustum";
    case ErrorCode::kParse:
      return "Parse";
    case ErrorCode::kIo:
      return "Io";
  }
  return "Unknown";
}

namespace {

bool IsSymmetricPsd(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double largest = eig.eigenvalues().maxCoeff();
  return eig.eigenvalues().minCoeff() >= -1e-10 * std::max(largest, 0.0);
}

}  // namespace

Intrinsics::Intrinsics(double fx, double fy, double cx, double cy, double skew)
    : fx(fx), fy(fy), cx(cx), cy(cy), skew(skew) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(skew)) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics require fx > 0, fy > 0 and finite entries");
  }
}

Matrix3 Intrinsics::K() const {
  Matrix3 k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Matrix3 Intrinsics::KInverse() const {
  Matrix3 k_inv;
  k_inv << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),
      0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k_inv;
}

Correspondence::Correspondence(const Vector2& x, const Vector2& xp)
    : x(x), xp(xp) {
  if (!x.allFinite() || !xp.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "correspondence coordinates must be finite");
  }
}

Correspondence::Correspondence(const Vector4& stacked)
    : Correspondence(stacked.head<2>(), stacked.tail<2>()) {}

Vector4 Correspondence::Stacked() const {
  Vector4 stacked;
  stacked << x, xp;
  return stacked;
}

NoiseModel::NoiseModel(double sigma) : sigma(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigma must be positive");
  }
}

Matrix4 NoiseModel::CorrespondenceCovariance() const {
  return Variance() * Matrix4::Identity();
}

Matrix3 FundamentalModel::F() const { return FromRowMajor(f); }

void FundamentalModel::Validate() const {
  if (std::abs(f.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "f must have unit norm");
  }
  Eigen::JacobiSVD<Matrix3> svd(F());
  const Vector3 sv = svd.singularValues();
  if (sv(2) > 1e-12 * sv(0)) {
    throw Error(ErrorCode::kInvalidArgument, "F must have rank 2");
  }
  if (!IsSymmetricPsd(cov_f)) {
    throw Error(ErrorCode::kInvalidArgument, "cov_f must be symmetric PSD");
  }
}

CameraMotion::CameraMotion(const Vector4& q_in, const Vector3& t_in,
                           const Matrix7& cov_p)
    : cov_p(cov_p) {
  const double qn = q_in.norm();
  const double tn = t_in.norm();
  if (!(qn > 0.0) || !(tn > 0.0) || !q_in.allFinite() || !t_in.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "motion needs a non-zero quaternion and translation");
  }
  q = q_in / qn;
  if (q(0) < 0.0) q = -q;
  t = t_in / tn;
}

CameraMotion::CameraMotion(const Matrix3& R, const Vector3& t,
                           const Matrix7& cov_p)
    : CameraMotion(RotationToQuaternion(R), t, cov_p) {}

Matrix3 CameraMotion::R() const { return QuaternionToRotation(q); }

Vector7 CameraMotion::Stacked() const {
  Vector7 p;
  p << q, t;
  return p;
}

void CameraMotion::Validate() const {
  if (std::abs(q.norm() - 1.0) > 1e-12 || q(0) < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "q must be unit with non-negative scalar part");
  }
  if (std::abs(t.norm() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "t must have unit norm");
  }
  if (!IsSymmetricPsd(cov_p)) {
    throw Error(ErrorCode::kInvalidArgument, "cov_p must be symmetric PSD");
  }
}

double SampsonResidual::Condition() const {
  const Vector4 lambda = Eigen::SelfAdjointEigenSolver<Matrix4>(
                             cov_delta, Eigen::EigenvaluesOnly).eigenvalues();
  return lambda(0) > 0.0 ? lambda(3) / lambda(0) : std::numeric_limits<double>::infinity();
}

Matrix3 Skew(const Vector3& v) {
  Matrix3 s;
  s << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
  return s;
}

Matrix3 QuaternionToRotation(const Vector4& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Matrix3 R;
  R << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return R;
}

std::array<Matrix3, 4> QuaternionToRotationDerivatives(const Vector4& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  std::array<Matrix3, 4> d;
  d[0] << w, -z, y, z, w, -x, -y, x, w;
  d[1] << x, y, z, y, -x, -w, z, w, -x;
  d[2] << -y, x, w, x, y, z, -w, z, -y;
  d[3] << -z, -w, x, w, -z, y, x, y, z;
  for (auto& m : d) m *= 2.0;
  return d;
}

Vector4 RotationToQuaternion(const Matrix3& R) {
  // Shepperd's method: pick the largest diagonal term of 4 q q^T.
  const double trace = R.trace();
  const std::array<double, 4> diag = {trace, R(0, 0), R(1, 1), R(2, 2)};
  const int k = static_cast<int>(
      std::max_element(diag.begin(), diag.end()) - diag.begin());
  Vector4 q;
  if (k == 0) {
    const double s = 2.0 * std::sqrt(std::max(0.0, 1.0 + trace));
    q << 0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s,
        (R(1, 0) - R(0, 1)) / s;
  } else if (k == 1) {
    const double s =
        2.0 * std::sqrt(std::max(0.0, 1.0 + R(0, 0) - R(1, 1) - R(2, 2)));
    q << (R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s,
        (R(0, 2) + R(2, 0)) / s;
  } else if (k == 2) {
    const double s =
        2.0 * std::sqrt(std::max(0.0, 1.0 - R(0, 0) + R(1, 1) - R(2, 2)));
    q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s,
        (R(1, 2) + R(2, 1)) / s;
  } else {
    const double s =
        2.0 * std::sqrt(std::max(0.0, 1.0 - R(0, 0) - R(1, 1) + R(2, 2)));
    q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s,
        (R(1, 2) + R(2, 1)) / s, 0.25 * s;
  }
  q.normalize();
  if (q(0) < 0.0) q = -q;
  return q;
}

double RotationAngleBetween(const Matrix3& a, const Matrix3& b) {
  const Matrix3 rel = a.transpose() * b;
  const Vector4 q = RotationToQuaternion(rel);
  // atan2 keeps precision for tiny angles where acos would not.
  return 2.0 * std::atan2(q.tail<3>().norm(), std::abs(q(0)));
}

double DirectionAngleBetween(const Vector3& a, const Vector3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Vector9 RowMajor(const Matrix3& m) {
  Vector9 v;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v(3 * r + c) = m(r, c);
  }
  return v;
}

Matrix3 FromRowMajor(const Vector9& v) {
  Matrix3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = v(3 * r + c);
  }
  return m;
}

Matrix3 ThetaResidual(const Vector9& f, const Vector4& q, const Vector3& t,
                      const Intrinsics& K) {
  const Matrix3 k = K.K();
  const Matrix3 m = k.transpose() * FromRowMajor(f) * k;
  const Matrix3 b = Skew(t) * QuaternionToRotation(q);
  const double mm = m.squaredNorm();
  const double s = mm > 0.0 ? m.cwiseProduct(b).sum() / mm : 0.0;
  return s * m - b;
}

Matrix3 FundamentalFromMotion(const Vector4& q, const Vector3& t,
                              const Intrinsics& K) {
  const Matrix3 k_inv = K.KInverse();
  Matrix3 F = k_inv.transpose() * Skew(t) * QuaternionToRotation(q) * k_inv;
  const double n = F.norm();
  if (n > 0.0) F /= n;
  return F;
}

}  // namespace rcme
