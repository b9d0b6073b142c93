// Runs the acceptance criteria at their stated tolerances and prints one
// PASS/FAIL line per criterion. Exit status is non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rcme/bench.h"
#include "rcme/engine.h"
#include "rcme/fmatrix.h"
#include "rcme/refine.h"
#include "rcme/stats.h"
#include "rcme/synth.h"
#include "test_util.h"

namespace rcme {
namespace {

using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer), fmt, args...);
  return buffer;
}

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Least-squares slope of log(y) against log(x).
double LogLogSlope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

double MinTime(int repeats, const std::function<void()>& fn) {
  double best = INFINITY;
  for (int r = 0; r < repeats; ++r) {
    const auto start = Clock::now();
    fn();
    best = std::min(best, Seconds(start));
  }
  return best;
}

Verdict Exactness() {
  const auto start = Clock::now();
  int successes = 0;
  int total = 0;
  double worst_r = 0.0, worst_t = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const Scene scene = test::MakeScene(1000 + seed, 0.0);
    for (Variant v : {Variant::kStandard, Variant::kPRcme, Variant::kRcme}) {
      EngineConfig config;
      config.variant = v;
      config.rng_seed = seed;
      const EngineResult result =
          RunEngine(scene.correspondences, scene.K, scene.noise, config);
      ++total;
      const auto* success = std::get_if<EstimationSuccess>(&result.outcome);
      if (!success) continue;
      const double r = RotationAngleBetween(success->motion.R(), scene.motion_truth.R());
      const double t = DirectionAngleBetween(success->motion.t, scene.motion_truth.t);
      worst_r = std::max(worst_r, r);
      worst_t = std::max(worst_t, t);
      if (r < 1e-4 && t < 1e-4) ++successes;
    }
  }
  const double elapsed = Seconds(start);
  return {successes == total && elapsed < 5.0,
          Format("%d/%d runs within 1e-4 rad (worst rot %.2e, trans %.2e), %.2f s",
                 successes, total, worst_r, worst_t, elapsed)};
}

Verdict Calibration() {
  const double threshold = Chi2InvCdf(3, 0.95);
  int accepted = 0;
  int total = 0;
  double mahal_sum = 0.0;
  for (uint64_t seed = 0; total < 10000; ++seed) {
    const Scene scene = test::MakeScene(2000 + seed, 0.5);
    CameraMotion motion = scene.motion_truth;
    motion.cov_p.setZero();
    for (const Correspondence& c : scene.correspondences) {
      if (total == 10000) break;
      const SampsonResidual r = ComputeSampsonResidual(c, motion, scene.K, scene.noise);
      ++total;
      mahal_sum += r.mahal;
      accepted += r.mahal <= threshold;
    }
  }
  const double rate = static_cast<double>(accepted) / total;
  return {std::abs(rate - 0.95) <= 0.02,
          Format("accept rate %.4f over %d points (target 0.95 +- 0.02), mean mahal %.3f",
                 rate, total, mahal_sum / total)};
}

Verdict JacobianSuite() {
  double worst[5] = {0, 0, 0, 0, 0};
  const char* names[5] = {"J_omega", "dTheta/df", "dTheta/dp", "J_delta_X",
                          "J_delta_p"};
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Scene scene = test::MakeScene(3000 + seed, 0.5, 0.0, 16);
    const CameraMotion& p = scene.motion_truth;
    const Intrinsics& K = scene.K;
    const Vector9 f = RowMajor(FundamentalFromMotion(p.q, p.t, K));
    const auto samples = test::FirstSamples(scene);

    const MatrixXd omega = test::NumericJacobian(
        [&](const VectorXd& g) -> VectorXd {
          VectorXd out(32);
          for (int k = 0; k < 8; ++k) {
            out.segment<4>(4 * k) =
                samples[k].Stacked() -
                ComputeSampsonCorrection(samples[k], FromRowMajor(g), false).delta;
          }
          return out;
        },
        f, 1e-6, test::kRelativeStepFloor);
    worst[0] = std::max(worst[0], test::RelativeError(OmegaJacobian(samples, f), omega));

    const ThetaJacobians theta = ThetaJacobian(f, p.q, p.t, K);
    const MatrixXd theta_f = test::NumericJacobian(
        [&](const VectorXd& g) -> VectorXd {
          return RowMajor(ThetaResidual(g, p.q, p.t, K));
        },
        f, 1e-6, test::kRelativeStepFloor);
    const MatrixXd theta_p = test::NumericJacobian(
        [&](const VectorXd& x) -> VectorXd {
          return RowMajor(ThetaResidual(f, x.head<4>(), x.tail<3>(), K));
        },
        p.Stacked());
    worst[1] = std::max(worst[1], test::RelativeError(theta.d_f, theta_f));
    worst[2] = std::max(worst[2], test::RelativeError(theta.d_p, theta_p));

    const Correspondence& c = scene.correspondences[10];
    const Matrix3 F = FromRowMajor(f);
    const MatrixXd delta_x = test::NumericJacobian(
        [&](const VectorXd& x) -> VectorXd {
          return ComputeSampsonCorrection(Correspondence(Vector4(x)), F, false).delta;
        },
        c.Stacked());
    worst[3] = std::max(worst[3], test::RelativeError(
                                      ComputeSampsonCorrection(c, F).d_delta_d_x, delta_x));

    const SampsonEvaluator evaluator(p, K, scene.noise);
    const Matrix3 k_inv = K.KInverse();
    const MatrixXd delta_p = test::NumericJacobian(
        [&](const VectorXd& x) -> VectorXd {
          const Matrix3 Fp = k_inv.transpose() * Skew(x.tail<3>()) *
                             QuaternionToRotation(x.head<4>()) * k_inv;
          return ComputeSampsonCorrection(c, Fp, false).delta;
        },
        p.Stacked());
    worst[4] =
        std::max(worst[4], test::RelativeError(evaluator.MotionJacobianAt(c), delta_p));
  }
  bool pass = true;
  std::string detail = "max relative error over 100 configurations:";
  for (int i = 0; i < 5; ++i) {
    pass = pass && worst[i] < 1e-4;
    detail += Format(" %s %.1e", names[i], worst[i]);
  }
  return {pass, detail};
}

Verdict CovariancePropagation() {
  const Intrinsics K(500.0, 500.0, 320.0, 240.0);
  const NoiseModel noise(0.5);
  const auto exact = test::WellSpreadSample(test::ReferenceMotion(), K);
  const Vector9 f0 = EstimateF8Point(exact);
  const Matrix9 cov_f = CovFOverdetermined(exact, f0, noise);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, noise.sigma);
  constexpr int kDraws = 2000;
  std::vector<Vector9> draws;
  draws.reserve(kDraws);
  int degenerate = 0;
  while (static_cast<int>(draws.size()) + degenerate < kDraws) {
    std::vector<Correspondence> noisy;
    for (const Correspondence& c : exact) {
      noisy.emplace_back(Vector4(c.Stacked() + Vector4(gauss(rng), gauss(rng),
                                                       gauss(rng), gauss(rng))));
    }
    try {
      Vector9 f = EstimateF8Point(noisy);
      if (f.dot(f0) < 0.0) f = -f;
      draws.push_back(f);
    } catch (const Error&) {
      ++degenerate;
    }
  }
  Vector9 mean = Vector9::Zero();
  for (const Vector9& f : draws) mean += f;
  mean /= draws.size();
  Matrix9 empirical = Matrix9::Zero();
  for (const Vector9& f : draws) empirical += (f - mean) * (f - mean).transpose();
  empirical /= draws.size() - 1.0;
  const double rel = (empirical - cov_f).norm() / cov_f.norm();

  // Null-space property on the reference sample and 100 random noisy samples.
  double worst_null = f0.dot(cov_f * f0) / cov_f.trace();
  int evaluated = 1;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Scene scene = test::MakeScene(4000 + seed, 0.5, 0.0, 8);
    try {
      const Vector9 f = EstimateF8Point(scene.correspondences);
      const Matrix9 cov = CovFOverdetermined(scene.correspondences, f, scene.noise);
      worst_null = std::max(worst_null, f.dot(cov * f) / cov.trace());
      ++evaluated;
    } catch (const Error&) {
    }
  }
  return {rel < 0.30 && worst_null < 1e-12,
          Format("Monte Carlo vs first-order Sigma_f: relative Frobenius error %.3f "
                 "(limit 0.30, %d draws, %d degenerate); max f'Sf/trace %.1e over %d "
                 "samples",
                 rel, static_cast<int>(draws.size()), degenerate, worst_null, evaluated)};
}

Verdict EntropyProperties() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Matrix4 A;
    for (int k = 0; k < 16; ++k) A(k) = gauss(rng);
    const Matrix4 cov = A * A.transpose() + 1e-3 * Matrix4::Identity();
    const double c = scale(rng);
    worst = std::max(worst, std::abs(GaussianDiffEntropy(c * cov) -
                                     (GaussianDiffEntropy(cov) + 2.0 * std::log(c))));
  }
  const double identity_error =
      std::abs(GaussianDiffEntropy(Matrix4::Identity()) -
               (2.0 * std::log(2.0 * std::numbers::pi) + 2.0));
  return {worst < 1e-9 && identity_error < 1e-12,
          Format("scaling identity max error %.1e, identity value error %.1e", worst,
                 identity_error)};
}

Verdict RobustnessOrdering() {
  const SuiteConfig suite = LoadSuiteConfig(RCME_SUITE_DIR "/stress.json");
  const auto start = Clock::now();
  const BenchmarkReport report = RunBenchmark(suite);
  const double elapsed = Seconds(start);
  int df[3] = {0, 0, 0}, fail[3] = {0, 0, 0}, trials = 0;
  for (const VariantSummary& s : report.table.at(0).variants) {
    const int v = static_cast<int>(s.variant);
    df[v] = s.detect_fail;
    fail[v] = s.failure;
    trials = s.trials;
  }
  const int standard = static_cast<int>(Variant::kStandard);
  const int prcme = static_cast<int>(Variant::kPRcme);
  const int rcme = static_cast<int>(Variant::kRcme);
  const bool ordering = df[rcme] + fail[rcme] <= df[prcme] + fail[prcme] &&
                        df[prcme] + fail[prcme] <= fail[standard];
  const bool failure_rates = fail[rcme] < fail[standard] && fail[standard] > 0;
  return {ordering && failure_rates && elapsed < 600.0,
          Format("%d trials: Standard DF %d F %d | pRCME DF %d F %d | RCME DF %d F %d; "
                 "ordering %s, failure %% %s, %.0f s",
                 trials, df[standard], fail[standard], df[prcme], fail[prcme], df[rcme],
                 fail[rcme], ordering ? "holds" : "violated",
                 failure_rates ? "holds" : "violated", elapsed)};
}

Verdict DetectFailBehavior() {
  SceneFamily family;
  family.scene.outlier_ratio = 1.0;
  int rcme_empty = 0, standard_success = 0, standard_flagged = 0;
  constexpr int kTrials = 100;
  for (int k = 0; k < kTrials; ++k) {
    const Scene scene = TrialScene(family, TrialSceneSeed(77, 0, k));
    EngineConfig config;
    config.rng_seed = TrialEngineSeed(77, 0, k);
    config.variant = Variant::kRcme;
    const EngineResult rcme =
        RunEngine(scene.correspondences, scene.K, scene.noise, config);
    if (const auto* fail = std::get_if<DetectFail>(&rcme.outcome)) {
      rcme_empty += fail->reason == DetectFailReason::kEmptyCandidateSet;
    }
    config.variant = Variant::kStandard;
    const EngineResult standard =
        RunEngine(scene.correspondences, scene.K, scene.noise, config);
    if (const auto* success = std::get_if<EstimationSuccess>(&standard.outcome)) {
      ++standard_success;
      standard_flagged += RefineAndAssess(success->motion, scene.correspondences,
                                          success->inlier_indices, scene.K, scene.noise)
                              .failed;
    }
  }
  return {rcme_empty >= 95 && standard_success == kTrials,
          Format("RCME DetectFail{EmptyCandidateSet} %d/%d, Standard Success %d/%d "
                 "(flagged failed by the metric: %d)",
                 rcme_empty, kTrials, standard_success, kTrials, standard_flagged)};
}

Verdict Complexity() {
  std::vector<double> sizes = {250, 500, 1000, 2000};
  std::vector<double> loop_times;
  for (double n : sizes) {
    const Scene scene = test::MakeScene(8000, 0.5, 0.3, static_cast<int>(n));
    EngineConfig config;
    config.rng_seed = 8;
    loop_times.push_back(MinTime(3, [&] {
      RunEngine(scene.correspondences, scene.K, scene.noise, config);
    }));
  }
  const double loop_slope = LogLogSlope(sizes, loop_times);

  std::vector<double> inlier_counts = {50, 100, 200, 400};
  std::vector<double> refine_times;
  for (double n : inlier_counts) {
    const Scene scene = test::MakeScene(8100, 0.5, 0.0, static_cast<int>(n));
    std::vector<int> inliers(scene.correspondences.size());
    for (size_t i = 0; i < inliers.size(); ++i) inliers[i] = static_cast<int>(i);
    const CameraMotion start(
        Matrix3(Eigen::AngleAxisd(0.01, Vector3::UnitY()) * scene.motion_truth.R()),
        Vector3(scene.motion_truth.t + Vector3(0.0, 0.01, 0.0)));
    refine_times.push_back(MinTime(5, [&] {
      MleRefine(start, scene.correspondences, inliers, scene.K);
    }));
  }
  const double refine_slope = LogLogSlope(inlier_counts, refine_times);
  return {std::abs(loop_slope - 1.0) <= 0.3 && refine_slope <= 3.3,
          Format("iteration loop slope %.2f (target 1.0 +- 0.3; %.1f..%.1f ms), refine "
                 "slope %.2f (limit 3.3)",
                 loop_slope, 1e3 * loop_times.front(), 1e3 * loop_times.back(),
                 refine_slope)};
}

Verdict Determinism() {
  SuiteConfig suite = LoadSuiteConfig(RCME_SUITE_DIR "/table.json");
  const std::string first = ReportToJson(RunBenchmark(suite), suite);
  const std::string second = ReportToJson(RunBenchmark(suite), suite);
  return {first == second && !first.empty(),
          Format("two runs of suites/table.json: %zu and %zu bytes, %s", first.size(),
                 second.size(), first == second ? "identical" : "different")};
}

Verdict FailureMetricConstants() {
  const double tau2 = ConsistenceThreshold(NoiseModel(0.5), 0.05);
  // F2^-1(p) = -2 log(1 - p) in closed form.
  const double closed_form = 0.25 * -2.0 * std::log(0.05);
  const bool tau_ok =
      std::abs(tau2 - 1.497866) < 5e-7 && std::abs(tau2 - closed_form) < 1e-12;
  const bool kappa_ok = IsFailedRecovery(100, 50, 0.5) && IsFailedRecovery(2, 1, 0.5) &&
                        !IsFailedRecovery(100, 51, 0.5);
  return {tau_ok && kappa_ok,
          Format("tau^2 = %.7f (closed form %.7f); ratio 0.5 failed: %s", tau2,
                 closed_form, IsFailedRecovery(100, 50, 0.5) ? "yes" : "no")};
}

}  // namespace
}  // namespace rcme

int main(int argc, char** argv) {
  using rcme::Verdict;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"exactness", rcme::Exactness},
      {"statistical calibration", rcme::Calibration},
      {"jacobian suite", rcme::JacobianSuite},
      {"covariance propagation", rcme::CovariancePropagation},
      {"entropy properties", rcme::EntropyProperties},
      {"robustness ordering", rcme::RobustnessOrdering},
      {"detect-fail behavior", rcme::DetectFailBehavior},
      {"complexity", rcme::Complexity},
      {"determinism", rcme::Determinism},
      {"failure-metric constants", rcme::FailureMetricConstants},
  };
  // Optional arguments select criteria by number; all run by default.
  std::vector<size_t> selected;
  for (int a = 1; a < argc; ++a) selected.push_back(std::stoul(argv[a]));
  if (selected.empty()) {
    for (size_t i = 1; i <= criteria.size(); ++i) selected.push_back(i);
  }
  int failures = 0;
  for (size_t number : selected) {
    if (number < 1 || number > criteria.size()) {
      std::fprintf(stderr, "no criterion %zu\n", number);
      return 2;
    }
    const size_t i = number - 1;
    Verdict verdict;
    try {
      verdict = criteria[i].second();
    } catch (const std::exception& e) {
      verdict = {false, std::string("exception: ") + e.what()};
    }
    failures += !verdict.pass;
    std::printf("[%s] %zu %s: %s\n", verdict.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, verdict.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", selected.size() - failures, selected.size());
  return failures == 0 ? 0 : 1;
}
