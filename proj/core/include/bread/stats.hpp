#pragma once

#include <string>
#include <vector>

namespace bread {

/// Per-seed accuracies for one method. Series compared against each other
/// must be aligned by seed (values[i] of both came from the same seed).
struct SeedSeries {
  std::string label;
  std::vector<double> values;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

/// Mean and sample standard deviation (n-1 denominator). Requires n >= 2.
MeanStd mean_std(const std::vector<double>& values);

struct PairedTestResult {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
};

/// Two-tailed paired t-test on per-seed differences b[i] - a[i].
/// Throws DegenerateDifferencesError when the differences have zero
/// variance; p is undefined there and is never reported as 0.
PairedTestResult paired_t_test(const SeedSeries& a, const SeedSeries& b);

/// Paired Cohen's d: mean(diff) / sample_std(diff) with diff = b - a.
/// This is the paired variant, not pooled-std d; swapping a and b flips
/// the sign. Same degeneracy rule as paired_t_test.
double cohens_d_paired(const SeedSeries& a, const SeedSeries& b);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
/// Exposed so tests can cross-check it against numerical integration.
double incomplete_beta(double a, double b, double x);

/// P(|T| > |t|) for Student's t with `dof` degrees of freedom,
/// computed as I_{v/(t^2+v)}(v/2, 1/2). Always in (0, 1].
double t_two_tailed_p(double t, int dof);

/// Report formatting: p to 4 decimals.
std::string format_p(double p);

}  // namespace bread
