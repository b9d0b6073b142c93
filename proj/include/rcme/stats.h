#pragma once

#include <span>

#include "rcme/types.h"

namespace rcme {

// Significance level with the thresholds it induces.
struct SignificanceConfig {
  double alpha = 0.05;
  double chi2_thresh_1dof = 0.0;
  double chi2_thresh_2dof = 0.0;
  double chi2_thresh_3dof = 0.0;
  double z_thresh = 0.0;

  // Throws kInvalidArgument unless 0 < alpha < 1.
  static SignificanceConfig FromAlpha(double alpha);
};

// Regularized lower incomplete gamma P(a, x).
double RegularizedGammaP(double a, double x);

double Chi2Cdf(int dof, double x);

// x with F_dof(x) = p. Throws kInvalidArgument for p outside (0, 1) or
// dof < 1.
double Chi2InvCdf(int dof, double p);

double NormalCdf(double x);

// Standard normal quantile. Throws kInvalidArgument for p outside (0, 1).
double NormalInvCdf(double p);

// Differential entropy in nats of a 4-variate Gaussian,
// 1/2 log((2 pi)^4 e^4 |cov|). Throws kDegenerateCovariance for |cov| <= 0.
double GaussianDiffEntropy(const Matrix4& cov);

// Same quantity from a precomputed log-determinant.
double GaussianDiffEntropyFromLogDet(double log_det);

struct EntropySummary {
  double psi = 0.0;  // signed arithmetic mean
  double s = 0.0;    // sample standard deviation, n - 1 denominator
  double z = 0.0;
};

// Z = (psi - mu) / (s / sqrt(n)). Throws kInconclusiveTest for fewer than two
// scores or zero spread; see InlierQualityTest for how callers resolve that.
EntropySummary ZStatistic(std::span<const double> scores, double mu);

// Mean and spread only; never throws for a non-empty input.
EntropySummary SummarizeScores(std::span<const double> scores);

}  // namespace rcme
