#include "rcme/stats.h"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace rcme {

namespace {

constexpr int kMaxSeriesTerms = 1000;
constexpr double kEps = 1e-16;

// Series expansion, converges fast for x < a + 1.
double GammaPSeries(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxSeriesTerms; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), used for x >= a + 1.
double GammaQContinuedFraction(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void RequireProbability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "probability must lie strictly inside (0, 1)");
  }
}

}  // namespace

SignificanceConfig SignificanceConfig::FromAlpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
  SignificanceConfig config;
  config.alpha = alpha;
  config.chi2_thresh_1dof = Chi2InvCdf(1, 1.0 - alpha);
  config.chi2_thresh_2dof = Chi2InvCdf(2, 1.0 - alpha);
  config.chi2_thresh_3dof = Chi2InvCdf(3, 1.0 - alpha);
  config.z_thresh = NormalInvCdf(1.0 - alpha);
  return config;
}

double RegularizedGammaP(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return GammaPSeries(a, x);
  return 1.0 - GammaQContinuedFraction(a, x);
}

namespace {

double RegularizedGammaQ(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - GammaPSeries(a, x);
  return GammaQContinuedFraction(a, x);
}

}  // namespace

double Chi2Cdf(int dof, double x) {
  if (dof < 1) {
    throw Error(ErrorCode::kInvalidArgument, "chi2 dof must be positive");
  }
  return RegularizedGammaP(0.5 * dof, 0.5 * x);
}

double Chi2InvCdf(int dof, double p) {
  if (dof < 1) {
    throw Error(ErrorCode::kInvalidArgument, "chi2 dof must be positive");
  }
  RequireProbability(p);
  const double k = static_cast<double>(dof);

  // Bracket the root, then Newton steps guarded by bisection.
  double lo = 0.0;
  double hi = std::max(1.0, k);
  while (Chi2Cdf(dof, hi) < p) {
    lo = hi;
    hi *= 2.0;
  }
  // Wilson-Hilferty start.
  const double z = NormalInvCdf(p);
  const double c = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1e-3, 1.0 - c + z * std::sqrt(c)), 3);
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

  const double log_norm = std::lgamma(0.5 * k) + 0.5 * k * std::log(2.0);
  // Upper-tail probabilities are solved on Q to keep their relative accuracy.
  const bool upper = p > 0.5;
  const double q = 1.0 - p;
  for (int iter = 0; iter < 200; ++iter) {
    const double f = upper ? q - RegularizedGammaQ(0.5 * k, 0.5 * x)
                           : Chi2Cdf(dof, x) - p;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double log_pdf = (0.5 * k - 1.0) * std::log(x) - 0.5 * x - log_norm;
    const double pdf = std::exp(log_pdf);
    double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double NormalInvCdf(double p) {
  RequireProbability(p);
  // Acklam's rational approximation, relative error ~1e-9.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;

  double x;
  if (p < kLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - kLow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement against erfc.
  for (int i = 0; i < 2; ++i) {
    const double e = NormalCdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double GaussianDiffEntropyFromLogDet(double log_det) {
  // 1/2 (4 log(2 pi) + 4 + log|cov|)
  return 2.0 * std::log(2.0 * std::numbers::pi) + 2.0 + 0.5 * log_det;
}

double GaussianDiffEntropy(const Matrix4& cov) {
  const double det = cov.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw Error(ErrorCode::kDegenerateCovariance,
                "entropy needs a positive-definite covariance");
  }
  return GaussianDiffEntropyFromLogDet(std::log(det));
}

EntropySummary SummarizeScores(std::span<const double> scores) {
  EntropySummary summary;
  if (scores.empty()) return summary;
  double sum = 0.0;
  for (double h : scores) sum += h;
  const double n = static_cast<double>(scores.size());
  summary.psi = sum / n;
  if (scores.size() >= 2) {
    double ss = 0.0;
    for (double h : scores) ss += (h - summary.psi) * (h - summary.psi);
    summary.s = std::sqrt(ss / (n - 1.0));
  }
  return summary;
}

EntropySummary ZStatistic(std::span<const double> scores, double mu) {
  if (scores.size() < 2) {
    throw Error(ErrorCode::kInconclusiveTest,
                "Z statistic needs at least two scores");
  }
  EntropySummary summary = SummarizeScores(scores);
  if (!(summary.s > 0.0)) {
    throw Error(ErrorCode::kInconclusiveTest,
                "Z statistic undefined for zero spread");
  }
  summary.z = (summary.psi - mu) /
              (summary.s / std::sqrt(static_cast<double>(scores.size())));
  return summary;
}

}  // namespace rcme
