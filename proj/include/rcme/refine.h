#pragma once

#include <span>
#include <vector>

#include "rcme/types.h"

namespace rcme {

// Linear triangulation under K[I|0] and K[R|t]. Throws kPointAtInfinity when
// the homogeneous scale vanishes or the rays are (nearly) parallel.
Vector3 Triangulate(const Correspondence& corr, const CameraMotion& motion,
                    const Intrinsics& K);

// Squared reprojection errors of X in the first and second view.
Vector2 ReprojectionErrors(const Correspondence& corr, const Vector3& X,
                           const CameraMotion& motion, const Intrinsics& K);

struct LmConfig {
  int max_iters = 100;
  // Relative cost decrease below which an accepted step terminates.
  double epsilon = 1e-8;
  // Per-coordinate reprojection residual (pixels) treated as exact.
  double residual_floor = 1e-10;
  double initial_lambda = 1e-3;
  double max_lambda = 1e16;
};

struct MleResult {
  CameraMotion motion;
  std::vector<Vector3> points3d;
  int iterations = 0;
  // Cost after the initial triangulation, then after every accepted step.
  std::vector<double> cost_history;

  double InitialCost() const { return cost_history.front(); }
  double FinalCost() const { return cost_history.back(); }
};

// Two-view bundle adjustment over (q, t, points) minimizing the summed squared
// reprojection error. Rotation moves on the left tangent, translation on its
// 2-dimensional sphere tangent. Requires at least 8 inliers
// (kTooFewCorrespondences).
MleResult MleRefine(const CameraMotion& motion,
                    std::span<const Correspondence> correspondences,
                    std::span<const int> inliers, const Intrinsics& K,
                    const LmConfig& config = LmConfig());

double HuberRho(double e2, double tau2);

// sigma^2 F2^-1(1 - alpha).
double ConsistenceThreshold(const NoiseModel& noise, double alpha);

struct FailureAssessment {
  int n_before = 0;
  int n_after = 0;
  bool failed = true;
};

// Counts the inliers whose Huber-weighted reprojection error (the larger of
// the two views, against the point triangulated under each motion) stays
// below the consistence threshold before and after refinement.
FailureAssessment FailureMetric(const CameraMotion& pre_motion,
                                const CameraMotion& post_motion,
                                std::span<const Correspondence> correspondences,
                                std::span<const int> inliers, const Intrinsics& K,
                                const NoiseModel& noise, double alpha = 0.05,
                                double kappa = 0.5);

// failed = n_before == 0 or n_after / n_before <= kappa.
bool IsFailedRecovery(int n_before, int n_after, double kappa);

struct RefinedSolution {
  CameraMotion motion;
  std::vector<Vector3> points3d;
  int n_before = 0;
  int n_after = 0;
  bool failed = true;
  int lm_iterations = 0;
};

// MleRefine followed by FailureMetric. With fewer than 8 inliers no refinement
// is attempted and the solution is reported as failed.
RefinedSolution RefineAndAssess(const CameraMotion& motion,
                                std::span<const Correspondence> correspondences,
                                std::span<const int> inliers, const Intrinsics& K,
                                const NoiseModel& noise, double alpha = 0.05,
                                double kappa = 0.5,
                                const LmConfig& config = LmConfig());

}  // namespace rcme
