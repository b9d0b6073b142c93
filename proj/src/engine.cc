#include "rcme/engine.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

namespace rcme {

namespace {

// Unbiased integer in [0, bound) by rejection on the top bits; the standard
// distributions are implementation-defined and would break cross-platform
// reproducibility of the sample stream.
uint64_t BoundedDraw(std::mt19937_64& rng, uint64_t bound) {
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % bound;
  uint64_t value;
  do {
    value = rng();
  } while (value >= limit);
  return value % bound;
}

struct InstantiatedModel {
  std::array<Correspondence, kMinimalSampleSize> samples;
  Vector9 f;
  CameraMotion motion;
};

// Sample, 8-point, decomposition and, unless skipped, covariance propagation.
// Returns the failure status when any sub-step refuses the sample.
std::variant<InstantiatedModel, IterationStatus> Instantiate(
    std::span<const Correspondence> correspondences,
    const std::array<int, kMinimalSampleSize>& indices, const Intrinsics& K,
    const NoiseModel& noise, bool with_covariance) {
  InstantiatedModel model;
  for (int k = 0; k < kMinimalSampleSize; ++k) {
    model.samples[k] = correspondences[indices[k]];
  }
  Vector9& f = model.f;
  try {
    f = EstimateF8Point(model.samples);
  } catch (const Error&) {
    return IterationStatus::kDegenerateSample;
  }
  try {
    model.motion = DecomposeToMotion(f, K, model.samples).motion;
  } catch (const Error&) {
    return IterationStatus::kCheiralityTie;
  }
  if (with_covariance) {
    try {
      const Matrix9 cov_f = CovFOverdetermined(model.samples, f, noise);
      model.motion.cov_p = CovP(f, cov_f, model.motion.q, model.motion.t, K);
    } catch (const Error&) {
      return IterationStatus::kCovarianceFailure;
    }
  }
  return model;
}

EngineResult RunStandard(std::span<const Correspondence> correspondences,
                         const Intrinsics& K, const NoiseModel& noise,
                         const EngineConfig& config,
                         const SignificanceConfig& significance) {
  const int n = static_cast<int>(correspondences.size());
  const double threshold = noise.Variance() * significance.chi2_thresh_1dof;

  EngineResult result;
  std::optional<EstimationSuccess> best;
  int scored = 0;
  for (int j = 0; j < config.max_iters; ++j) {
    IterationRecord record;
    record.iteration = j;
    record.sample = SampleMinimal(n, config.rng_seed, j);
    auto instantiated =
        Instantiate(correspondences, record.sample, K, noise, false);
    if (auto* status = std::get_if<IterationStatus>(&instantiated)) {
      record.status = *status;
      result.diagnostics.push_back(record);
      continue;
    }
    const InstantiatedModel& model = std::get<InstantiatedModel>(instantiated);
    const CameraMotion& motion = model.motion;
    const Matrix3 F = FromRowMajor(model.f);
    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
      if (SampsonDistanceSquared(correspondences[i], F) <= threshold) {
        inliers.push_back(i);
      }
    }
    ++scored;
    record.status = IterationStatus::kScored;
    record.n_inliers = static_cast<int>(inliers.size());
    result.diagnostics.push_back(record);
    if (!best || inliers.size() > best->inlier_indices.size()) {
      best = EstimationSuccess{motion, std::move(inliers), 0};
    }
  }
  if (!best) {
    // No sample ever instantiated a model; report the identity motion with
    // empty support so the failure metric flags it.
    best = EstimationSuccess{CameraMotion(), {}, 0};
  }
  best->candidate_count = scored;
  result.outcome = std::move(*best);
  return result;
}

}  // namespace

const char* VariantName(Variant variant) {
  switch (variant) {
    case Variant::kStandard:
      return "Standard";
    case Variant::kPRcme:
      return "pRCME";
    case Variant::kRcme:
      return "RCME";
  }
  return "Unknown";
}

Variant ParseVariant(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "standard") return Variant::kStandard;
  if (lower == "prcme") return Variant::kPRcme;
  if (lower == "rcme") return Variant::kRcme;
  throw Error(ErrorCode::kInvalidArgument, "unknown variant '" + name + "'");
}

const char* DetectFailReasonName(DetectFailReason reason) {
  switch (reason) {
    case DetectFailReason::kEmptyCandidateSet:
      return "EmptyCandidateSet";
    case DetectFailReason::kTooFewCorrespondences:
      return "TooFewCorrespondences";
  }
  return "Unknown";
}

const char* IterationStatusName(IterationStatus status) {
  switch (status) {
    case IterationStatus::kDegenerateSample:
      return "DegenerateSample";
    case IterationStatus::kCheiralityTie:
      return "CheiralityTie";
    case IterationStatus::kCovarianceFailure:
      return "CovarianceFailure";
    case IterationStatus::kSampleTestFailed:
      return "SampleTestFailed";
    case IterationStatus::kQualityTestFailed:
      return "QualityTestFailed";
    case IterationStatus::kSizeTestFailed:
      return "SizeTestFailed";
    case IterationStatus::kAccepted:
      return "Accepted";
    case IterationStatus::kScored:
      return "Scored";
  }
  return "Unknown";
}

void EngineConfig::Validate() const {
  if (max_iters < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_iters must be at least 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
  if (!(lambda >= 0.5 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must lie in [0.5, 1]");
  }
  if (!(omega_prior >= 0.0 && omega_prior <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "omega_prior must lie in [0, 1]");
  }
  if (!std::isfinite(mu)) {
    throw Error(ErrorCode::kInvalidArgument, "mu must be finite");
  }
}

std::array<int, kMinimalSampleSize> SampleMinimal(int n, uint64_t seed,
                                                  int iteration) {
  if (n < kMinimalSampleSize) {
    throw Error(ErrorCode::kTooFewCorrespondences,
                "at least 8 correspondences are required");
  }
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(iteration)};
  std::mt19937_64 rng(seq);
  std::array<int, kMinimalSampleSize> out{};
  for (int k = 0; k < kMinimalSampleSize; ++k) {
    int candidate;
    do {
      candidate = static_cast<int>(BoundedDraw(rng, static_cast<uint64_t>(n)));
    } while (std::find(out.begin(), out.begin() + k, candidate) != out.begin() + k);
    out[k] = candidate;
  }
  return out;
}

SampleTestResult SampleConsistenceTest(std::span<const Correspondence> samples,
                                       const CameraMotion& motion,
                                       const Intrinsics& K,
                                       const NoiseModel& noise,
                                       const SignificanceConfig& significance) {
  SampleTestResult result;
  result.passed = true;
  const SampsonEvaluator evaluator(motion, K, noise);
  for (size_t k = 0; k < samples.size() && k < result.mahal.size(); ++k) {
    double mahal;
    try {
      mahal = evaluator.Evaluate(samples[k]).mahal;
    } catch (const Error&) {
      mahal = std::numeric_limits<double>::infinity();
    }
    result.mahal[k] = mahal;
    if (!(mahal <= significance.chi2_thresh_3dof)) result.passed = false;
  }
  return result;
}

InlierScores FindAndScoreInliers(std::span<const Correspondence> correspondences,
                                 const CameraMotion& motion,
                                 const Intrinsics& K, const NoiseModel& noise,
                                 const SignificanceConfig& significance) {
  InlierScores out;
  const SampsonEvaluator evaluator(motion, K, noise);
  for (size_t i = 0; i < correspondences.size(); ++i) {
    SampsonResidual residual;
    try {
      residual = evaluator.Evaluate(correspondences[i]);
    } catch (const Error&) {
      continue;
    }
    if (residual.mahal <= significance.chi2_thresh_3dof &&
        std::isfinite(residual.log_det)) {
      out.indices.push_back(static_cast<int>(i));
      out.scores.push_back(GaussianDiffEntropyFromLogDet(residual.log_det));
    }
  }
  return out;
}

QualityTestResult InlierQualityTest(std::span<const double> scores, int n_total,
                                    double omega_p, const EngineConfig& config,
                                    const SignificanceConfig& significance) {
  QualityTestResult result;
  const int n_j = static_cast<int>(scores.size());
  result.summary = SummarizeScores(scores);
  if (n_j < 2 || n_total <= 0) return result;

  const double z_limit = config.z_form == ZTestForm::kAsPublished
                             ? significance.z_thresh
                             : -significance.z_thresh;
  try {
    result.summary = ZStatistic(scores, config.mu);
    result.z_passed = result.summary.z <= z_limit;
  } catch (const Error&) {
    // Zero spread: the mean alone decides.
    result.summary.z = result.summary.psi <= config.mu
                           ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    result.z_passed = result.summary.psi <= config.mu;
  }
  result.size_passed =
      static_cast<double>(n_j) / n_total >= config.lambda * omega_p;
  return result;
}

EngineResult RunEngine(std::span<const Correspondence> correspondences,
                       const Intrinsics& K, const NoiseModel& noise,
                       const EngineConfig& config) {
  config.Validate();
  const int n = static_cast<int>(correspondences.size());
  if (n < kMinimalSampleSize) {
    EngineResult result;
    result.outcome = DetectFail{DetectFailReason::kTooFewCorrespondences};
    return result;
  }
  const SignificanceConfig significance = SignificanceConfig::FromAlpha(config.alpha);
  if (config.variant == Variant::kStandard) {
    return RunStandard(correspondences, K, noise, config, significance);
  }

  EngineResult result;
  double omega_p = config.omega_prior;
  for (int j = 0; j < config.max_iters; ++j) {
    IterationRecord record;
    record.iteration = j;
    record.sample = SampleMinimal(n, config.rng_seed, j);
    auto instantiated = Instantiate(correspondences, record.sample, K, noise, true);
    if (auto* status = std::get_if<IterationStatus>(&instantiated)) {
      record.status = *status;
      record.omega_p = omega_p;
      result.diagnostics.push_back(record);
      continue;
    }
    const InstantiatedModel& model = std::get<InstantiatedModel>(instantiated);

    // Inliers are counted for every instantiated model so that the running
    // inlier-ratio estimate is identical across variants.
    InlierScores inliers =
        FindAndScoreInliers(correspondences, model.motion, K, noise, significance);
    const int n_j = static_cast<int>(inliers.indices.size());
    omega_p = std::max(omega_p, static_cast<double>(n_j) / n);
    record.n_inliers = n_j;
    record.omega_p = omega_p;

    const QualityTestResult quality =
        InlierQualityTest(inliers.scores, n, omega_p, config, significance);
    record.psi = quality.summary.psi;
    record.s = quality.summary.s;
    record.z = quality.summary.z;

    if (config.variant == Variant::kRcme &&
        !SampleConsistenceTest(model.samples, model.motion, K, noise, significance)
             .passed) {
      record.status = IterationStatus::kSampleTestFailed;
      result.diagnostics.push_back(record);
      continue;
    }
    if (!quality.z_passed) {
      record.status = IterationStatus::kQualityTestFailed;
      result.diagnostics.push_back(record);
      continue;
    }
    if (!quality.size_passed) {
      record.status = IterationStatus::kSizeTestFailed;
      result.diagnostics.push_back(record);
      continue;
    }

    record.status = IterationStatus::kAccepted;
    CandidateModel candidate;
    candidate.motion = model.motion;
    candidate.inlier_indices = std::move(inliers.indices);
    candidate.scores = std::move(inliers.scores);
    candidate.psi = quality.summary.psi;
    candidate.s = quality.summary.s;
    candidate.z = quality.summary.z;
    candidate.iteration = j;
    result.candidates.push_back(std::move(candidate));

    const bool stop = config.early_term_entropy &&
                      quality.summary.psi < *config.early_term_entropy;
    record.early_terminated = stop;
    result.diagnostics.push_back(record);
    if (stop) break;
  }

  if (result.candidates.empty()) {
    result.outcome = DetectFail{DetectFailReason::kEmptyCandidateSet};
    return result;
  }
  const auto best = std::min_element(
      result.candidates.begin(), result.candidates.end(),
      [](const CandidateModel& a, const CandidateModel& b) { return a.psi < b.psi; });
  result.outcome = EstimationSuccess{best->motion, best->inlier_indices,
                                     static_cast<int>(result.candidates.size())};
  return result;
}

}  // namespace rcme
