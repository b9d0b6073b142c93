#include "rcme/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rcme/fmatrix.h"
#include "rcme/stats.h"

namespace rcme {

namespace {

using Rng = std::mt19937_64;

class PixelSampler {
 public:
  PixelSampler(const SceneConfig& config, Rng& rng)
      : config_(config), rng_(rng) {
    if (config.distribution == PointDistribution::kClustered) {
      const double margin =
          std::min(2.0 * config.cluster_sigma_px,
                   0.25 * std::min(config.image_width, config.image_height));
      std::uniform_real_distribution<double> ux(margin, config.image_width - margin);
      std::uniform_real_distribution<double> uy(margin, config.image_height - margin);
      for (int c = 0; c < config.n_clusters; ++c) {
        centers_.emplace_back(ux(rng_), uy(rng_));
      }
    }
  }

  Vector2 Draw() {
    if (centers_.empty()) {
      std::uniform_real_distribution<double> ux(0.0, config_.image_width);
      std::uniform_real_distribution<double> uy(0.0, config_.image_height);
      const double x = ux(rng_);
      return Vector2(x, uy(rng_));
    }
    std::uniform_int_distribution<int> pick(0, static_cast<int>(centers_.size()) - 1);
    std::normal_distribution<double> offset(0.0, config_.cluster_sigma_px);
    while (true) {
      const Vector2& center = centers_[pick(rng_)];
      const double dx = offset(rng_);
      const Vector2 p(center.x() + dx, center.y() + offset(rng_));
      if (InImage(p)) return p;
    }
  }

  bool InImage(const Vector2& p) const {
    return p.x() >= 0.0 && p.x() <= config_.image_width && p.y() >= 0.0 &&
           p.y() <= config_.image_height;
  }

 private:
  const SceneConfig& config_;
  Rng& rng_;
  std::vector<Vector2> centers_;
};

bool Project(const Matrix3& k, const Vector3& X, Vector2* pixel) {
  if (!(X.z() > 1e-9)) return false;
  const Vector3 h = k * X;
  *pixel = h.hnormalized();
  return true;
}

void AddNoise(double sigma, Rng& rng, Vector2* p) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  const double dx = noise(rng);
  const double dy = noise(rng);
  *p += Vector2(dx, dy);
}

std::vector<bool> DrawLabels(int n, int n_outliers, Rng& rng) {
  std::vector<bool> labels(n, true);
  std::fill(labels.begin(), labels.begin() + n_outliers, false);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

// Visible 3D point observed at a sampled first-view pixel. Returns false when
// the second view does not see it.
bool SampleVisiblePoint(const SceneConfig& config, const Matrix3& R,
                        const Vector3& t, PixelSampler& sampler, Rng& rng,
                        Vector3* X, Vector2* x1, Vector2* x2) {
  std::uniform_real_distribution<double> depth(config.depth_near, config.depth_far);
  *x1 = sampler.Draw();
  const double d = depth(rng);
  *X = d * (config.K.KInverse() * x1->homogeneous());
  return Project(config.K.K(), R * *X + t, x2) && sampler.InImage(*x2);
}

}  // namespace

void SceneConfig::Validate() const {
  if (n_points < 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_points must be non-negative");
  }
  if (!(outlier_ratio >= 0.0 && outlier_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "outlier_ratio must lie in [0, 1]");
  }
  if (!(sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be non-negative");
  }
  if (!(depth_near > 0.0 && depth_far >= depth_near)) {
    throw Error(ErrorCode::kInvalidArgument, "depth range must satisfy 0 < near <= far");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  if (distribution == PointDistribution::kClustered &&
      (n_clusters < 1 || !(cluster_sigma_px > 0.0))) {
    throw Error(ErrorCode::kInvalidArgument,
                "clustered scenes need n_clusters >= 1 and cluster_sigma_px > 0");
  }
}

int Scene::OutlierCount() const {
  return static_cast<int>(std::count(inlier_labels.begin(), inlier_labels.end(), false));
}

double OutlierMargin(double sigma) {
  static const double kRadius = std::sqrt(Chi2InvCdf(3, 0.95));
  return 5.0 * sigma * kRadius;
}

Scene GenerateScene(const SceneConfig& config) {
  config.Validate();
  Rng rng(config.rng_seed);
  PixelSampler sampler(config, rng);

  const Matrix3 R = config.motion_truth.R();
  const Vector3& t = config.motion_truth.t;
  const Matrix3 F_true = FundamentalFromMotion(config.motion_truth.q, t, config.K);
  const double margin = std::max(1.0, OutlierMargin(config.sigma));

  const int n = config.n_points;
  const int n_outliers = static_cast<int>(std::lround(config.outlier_ratio * n));
  Scene scene;
  scene.inlier_labels = DrawLabels(n, n_outliers, rng);
  scene.motion_truth = config.motion_truth;
  scene.K = config.K;
  scene.noise = NoiseModel(config.sigma > 0.0 ? config.sigma : 0.5);
  scene.correspondences.reserve(n);
  scene.points3d.reserve(n);

  const long max_attempts = 1000L * std::max(n, 1);
  long attempts = 0;
  auto check_budget = [&]() {
    if (++attempts > max_attempts) {
      throw Error(ErrorCode::kEmptyFrustum,
                  "the two camera frusta do not overlap in the depth range");
    }
  };

  std::uniform_real_distribution<double> ux(0.0, config.image_width);
  std::uniform_real_distribution<double> uy(0.0, config.image_height);
  for (int i = 0; i < n; ++i) {
    Vector3 X;
    Vector2 x1, x2;
    do {
      check_budget();
    } while (!SampleVisiblePoint(config, R, t, sampler, rng, &X, &x1, &x2));
    AddNoise(config.sigma, rng, &x1);

    if (scene.inlier_labels[i]) {
      AddNoise(config.sigma, rng, &x2);
    } else {
      // Uniform second-view point well away from the true epipolar line.
      while (true) {
        check_budget();
        const double px = ux(rng);
        const Vector2 candidate(px, uy(rng));
        const Vector3 line = F_true * x1.homogeneous();
        const double line_dist =
            std::abs(line.dot(candidate.homogeneous())) / line.head<2>().norm();
        const double sampson =
            std::sqrt(SampsonDistanceSquared(Correspondence(x1, candidate), F_true));
        if (line_dist >= margin && sampson >= margin) {
          x2 = candidate;
          break;
        }
      }
    }
    scene.correspondences.emplace_back(x1, x2);
    scene.points3d.push_back(X);
  }
  return scene;
}

Scene GeneratePlanarScene(const SceneConfig& config, double plane_depth) {
  config.Validate();
  Rng rng(config.rng_seed);
  PixelSampler sampler(config, rng);
  const Matrix3 R = config.motion_truth.R();
  const Vector3& t = config.motion_truth.t;

  Scene scene;
  scene.motion_truth = config.motion_truth;
  scene.K = config.K;
  scene.noise = NoiseModel(config.sigma > 0.0 ? config.sigma : 0.5);
  scene.inlier_labels.assign(config.n_points, true);
  long attempts = 0;
  for (int i = 0; i < config.n_points; ++i) {
    while (true) {
      if (++attempts > 1000L * std::max(config.n_points, 1)) {
        throw Error(ErrorCode::kEmptyFrustum, "plane not visible in both views");
      }
      const Vector2 x1 = sampler.Draw();
      const Vector3 X = plane_depth * (config.K.KInverse() * x1.homogeneous());
      Vector2 x2;
      if (!Project(config.K.K(), R * X + t, &x2) || !sampler.InImage(x2)) continue;
      Vector2 n1 = x1, n2 = x2;
      AddNoise(config.sigma, rng, &n1);
      AddNoise(config.sigma, rng, &n2);
      scene.correspondences.emplace_back(n1, n2);
      scene.points3d.push_back(X);
      break;
    }
  }
  return scene;
}

Scene GeneratePureRotationScene(const SceneConfig& config,
                                const Matrix3& rotation) {
  config.Validate();
  Scene scene;
  Rng rng(config.rng_seed);
  PixelSampler sampler(config, rng);
  std::uniform_real_distribution<double> depth(config.depth_near, config.depth_far);
  scene.motion_truth = CameraMotion(rotation, Vector3::UnitX());
  scene.K = config.K;
  scene.noise = NoiseModel(config.sigma > 0.0 ? config.sigma : 0.5);
  scene.inlier_labels.assign(config.n_points, true);
  long attempts = 0;
  for (int i = 0; i < config.n_points; ++i) {
    while (true) {
      if (++attempts > 1000L * std::max(config.n_points, 1)) {
        throw Error(ErrorCode::kEmptyFrustum, "rotation leaves no overlap");
      }
      const Vector2 x1 = sampler.Draw();
      const Vector3 X = depth(rng) * (config.K.KInverse() * x1.homogeneous());
      Vector2 x2;
      if (!Project(config.K.K(), rotation * X, &x2) || !sampler.InImage(x2)) continue;
      Vector2 n1 = x1, n2 = x2;
      AddNoise(config.sigma, rng, &n1);
      AddNoise(config.sigma, rng, &n2);
      scene.correspondences.emplace_back(n1, n2);
      scene.points3d.push_back(X);
      break;
    }
  }
  return scene;
}

CameraMotion RandomMotion(uint64_t seed, double max_angle_rad) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector3 axis;
  for (int i = 0; i < 3; ++i) axis(i) = gauss(rng);
  axis.normalize();
  const double angle = max_angle_rad * unit(rng);
  Vector4 q;
  q << std::cos(0.5 * angle), std::sin(0.5 * angle) * axis;
  std::uniform_real_distribution<double> lateral(-0.2, 0.2);
  const double ty = lateral(rng);
  const double tz = lateral(rng);
  return CameraMotion(q, Vector3(1.0, ty, tz));
}

}  // namespace rcme
