#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcme/types.h"

namespace rcme {

enum class PointDistribution { kUniform, kClustered };

struct SceneConfig {
  int n_points = 200;
  double outlier_ratio = 0.0;
  // Pixel noise; 0 gives exact projections.
  double sigma = 0.5;
  CameraMotion motion_truth;
  Intrinsics K = Intrinsics(500.0, 500.0, 320.0, 240.0);
  int image_width = 640;
  int image_height = 480;
  double depth_near = 4.0;
  double depth_far = 12.0;
  PointDistribution distribution = PointDistribution::kUniform;
  int n_clusters = 5;
  double cluster_sigma_px = 50.0;
  uint64_t rng_seed = 0;

  // Throws kInvalidArgument for out-of-range fields.
  void Validate() const;
};

struct Scene {
  std::vector<Correspondence> correspondences;
  // true = inlier.
  std::vector<bool> inlier_labels;
  CameraMotion motion_truth;
  Intrinsics K;
  NoiseModel noise;
  // Ground-truth structure in the first camera frame; outliers keep the
  // point behind their first-view observation.
  std::vector<Vector3> points3d;

  int OutlierCount() const;
};

// Minimum distance of a synthetic outlier from the true epipolar geometry,
// 5 sigma sqrt(F3^-1(0.95)).
double OutlierMargin(double sigma);

// Throws kEmptyFrustum when the two views share (almost) no visible volume.
Scene GenerateScene(const SceneConfig& config);

// Points on the plane z = depth (first camera frame) seen from both views,
// with optional noise. For degeneracy tests only.
Scene GeneratePlanarScene(const SceneConfig& config, double plane_depth);

// Second camera differs by rotation only; the translation is zero.
Scene GeneratePureRotationScene(const SceneConfig& config,
                                const Matrix3& rotation);

// Random motion with a rotation of at most max_angle_rad about a random axis
// and a unit translation mostly along +x (a sideways-moving camera).
CameraMotion RandomMotion(uint64_t seed, double max_angle_rad);

}  // namespace rcme
