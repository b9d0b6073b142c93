#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "rcme/fmatrix.h"
#include "rcme/synth.h"
#include "rcme/types.h"

namespace rcme {
namespace test {

// Central differences with per-coordinate step h * max(floor, |x_i|). A small
// floor gives relative steps, needed for the pixel-coordinate entries of F
// that span many orders of magnitude.
inline Eigen::MatrixXd NumericJacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& x, double h = 1e-6, double floor = 1.0) {
  const Eigen::VectorXd y0 = fn(x);
  Eigen::MatrixXd J(y0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double step = h * std::max(floor, std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    J.col(i) = (fn(xp) - fn(xm)) / (2.0 * step);
  }
  return J;
}

inline double RelativeError(const Eigen::MatrixXd& actual,
                            const Eigen::MatrixXd& expected) {
  const double scale = std::max(expected.norm(), 1e-300);
  return (actual - expected).norm() / scale;
}

inline Scene MakeScene(uint64_t seed, double sigma, double outlier_ratio = 0.0,
                       int n_points = 200) {
  SceneConfig config;
  config.n_points = n_points;
  config.sigma = sigma;
  config.outlier_ratio = outlier_ratio;
  config.motion_truth = RandomMotion(seed * 7919 + 1, 0.35);
  config.rng_seed = seed;
  return GenerateScene(config);
}

inline std::vector<Correspondence> FirstSamples(const Scene& scene, int count = 8) {
  return std::vector<Correspondence>(scene.correspondences.begin(),
                                     scene.correspondences.begin() + count);
}

// Eight well-spread pixels with distinct depths, seen under a fixed moderate
// motion.
inline std::vector<Correspondence> WellSpreadSample(const CameraMotion& motion,
                                                    const Intrinsics& K) {
  const double layout[8][3] = {{80, 60, 5},   {320, 50, 9},  {560, 70, 6},
                               {590, 240, 11}, {560, 420, 4.5}, {320, 430, 8},
                               {70, 410, 10},  {60, 230, 7}};
  std::vector<Correspondence> out;
  for (const auto& p : layout) {
    const Vector3 X = p[2] * (K.KInverse() * Vector3(p[0], p[1], 1.0));
    const Vector3 y = K.K() * (motion.R() * X + motion.t);
    out.emplace_back(Vector2(p[0], p[1]), y.hnormalized());
  }
  return out;
}

// Relative steps for the entries of a pixel-coordinate f.
constexpr double kRelativeStepFloor = 1e-9;

inline CameraMotion ReferenceMotion() {
  const Eigen::AngleAxisd rotation(0.1, Vector3(0.2, 1.0, 0.1).normalized());
  return CameraMotion(Matrix3(rotation.toRotationMatrix()), Vector3(1.0, 0.1, 0.1));
}

}  // namespace test
}  // namespace rcme
