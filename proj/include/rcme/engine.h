#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rcme/fmatrix.h"
#include "rcme/stats.h"
#include "rcme/types.h"

namespace rcme {

enum class Variant {
  // Gold-standard RANSAC: largest Sampson-distance inlier set wins.
  kStandard,
  // Entropy-based inlier quality test without the sample consistence test.
  kPRcme,
  // Sample consistence test plus inlier quality test.
  kRcme,
};

const char* VariantName(Variant variant);
// Accepts "Standard", "pRCME", "RCME" (case-insensitive).
Variant ParseVariant(const std::string& name);

// Direction of the entropy Z comparison. kAsPublished passes when
// Z <= Phi^-1(1 - alpha); kOneSidedLower passes when Z <= -Phi^-1(1 - alpha).
enum class ZTestForm { kAsPublished, kOneSidedLower };

struct EngineConfig {
  Variant variant = Variant::kRcme;
  int max_iters = 200;
  double alpha = 0.05;
  // Entropy threshold in nats.
  double mu = -3.53;
  // Conservative coefficient of the inlier-size condition.
  double lambda = 0.7;
  double omega_prior = 0.5;
  std::optional<double> early_term_entropy;
  uint64_t rng_seed = 0;
  ZTestForm z_form = ZTestForm::kAsPublished;

  void Validate() const;
};

struct CandidateModel {
  CameraMotion motion;
  std::vector<int> inlier_indices;
  std::vector<double> scores;
  double psi = 0.0;
  double s = 0.0;
  double z = 0.0;
  int iteration = -1;
};

enum class DetectFailReason { kEmptyCandidateSet, kTooFewCorrespondences };

const char* DetectFailReasonName(DetectFailReason reason);

struct EstimationSuccess {
  CameraMotion motion;
  std::vector<int> inlier_indices;
  int candidate_count = 0;
};

struct DetectFail {
  DetectFailReason reason = DetectFailReason::kEmptyCandidateSet;
};

using EstimationOutcome = std::variant<EstimationSuccess, DetectFail>;

enum class IterationStatus {
  kDegenerateSample,
  kCheiralityTie,
  kCovarianceFailure,
  kSampleTestFailed,
  kQualityTestFailed,
  kSizeTestFailed,
  kAccepted,
  // Standard variant: model scored by inlier count.
  kScored,
};

const char* IterationStatusName(IterationStatus status);

struct IterationRecord {
  int iteration = 0;
  std::array<int, kMinimalSampleSize> sample{};
  IterationStatus status = IterationStatus::kDegenerateSample;
  int n_inliers = 0;
  double psi = 0.0;
  double s = 0.0;
  double z = 0.0;
  double omega_p = 0.0;
  bool early_terminated = false;
};

struct EngineResult {
  EstimationOutcome outcome;
  std::vector<IterationRecord> diagnostics;
  // Candidate set in insertion order (empty for the Standard variant).
  std::vector<CandidateModel> candidates;

  bool Succeeded() const {
    return std::holds_alternative<EstimationSuccess>(outcome);
  }
};

// 8 distinct indices drawn uniformly from [0, n). The stream depends only on
// (seed, iteration). Throws kTooFewCorrespondences for n < 8.
std::array<int, kMinimalSampleSize> SampleMinimal(int n, uint64_t seed,
                                                  int iteration);

struct SampleTestResult {
  bool passed = false;
  std::array<double, kMinimalSampleSize> mahal{};
};

// Every instantiating sample must satisfy delta^T Sigma_delta^-1 delta <=
// F3^-1(1 - alpha). Epipole-degenerate samples fail.
SampleTestResult SampleConsistenceTest(std::span<const Correspondence> samples,
                                       const CameraMotion& motion,
                                       const Intrinsics& K,
                                       const NoiseModel& noise,
                                       const SignificanceConfig& significance);

struct InlierScores {
  std::vector<int> indices;
  // Differential entropy of each inlier's Sampson residual.
  std::vector<double> scores;
};

InlierScores FindAndScoreInliers(std::span<const Correspondence> correspondences,
                                 const CameraMotion& motion,
                                 const Intrinsics& K, const NoiseModel& noise,
                                 const SignificanceConfig& significance);

struct QualityTestResult {
  bool z_passed = false;
  bool size_passed = false;
  EntropySummary summary;

  bool Passed() const { return z_passed && size_passed; }
};

// Entropy Z test plus the size condition n_j / n >= lambda * omega_p.
// Zero spread passes the Z criterion iff psi <= mu; fewer than two scores
// fail.
QualityTestResult InlierQualityTest(std::span<const double> scores, int n_total,
                                    double omega_p, const EngineConfig& config,
                                    const SignificanceConfig& significance);

EngineResult RunEngine(std::span<const Correspondence> correspondences,
                       const Intrinsics& K, const NoiseModel& noise,
                       const EngineConfig& config);

}  // namespace rcme
