#include "bread/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "bread/errors.hpp"

namespace bread {

MeanStd mean_std(const std::vector<double>& values) {
  if (values.size() < 2)
    throw Error(ErrorKind::config, "mean_std requires at least 2 values, got " +
                                       std::to_string(values.size()));
  MeanStd out;
  out.n = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / out.n;
  double ss = 0.0;
  for (double v : values) {
    double d = v - out.mean;
    ss += d * d;
  }
  out.std = std::sqrt(ss / (out.n - 1));
  return out;
}

namespace {

std::vector<double> paired_diffs(const SeedSeries& a, const SeedSeries& b) {
  if (a.values.size() != b.values.size())
    throw Error(ErrorKind::config,
                "paired series must have equal length: " + a.label + " has " +
                    std::to_string(a.values.size()) + ", " + b.label + " has " +
                    std::to_string(b.values.size()));
  if (a.values.size() < 2)
    throw Error(ErrorKind::config, "paired tests require at least 2 seeds");
  std::vector<double> diffs(a.values.size());
  for (size_t i = 0; i < a.values.size(); ++i) diffs[i] = b.values[i] - a.values[i];
  return diffs;
}

/// Continued fraction for the incomplete beta, evaluated with the modified
/// Lentz method.
double beta_cf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-14;
  const double fpmin = 1e-300;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  // Use the continued fraction directly in its fast-converging region and
  // the symmetry relation elsewhere.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double t_two_tailed_p(double t, int dof) {
  if (dof < 1) throw Error(ErrorKind::config, "t-test needs dof >= 1");
  double v = static_cast<double>(dof);
  double x = v / (t * t + v);
  double p = incomplete_beta(v / 2.0, 0.5, x);
  if (p > 1.0) p = 1.0;
  if (p <= 0.0) p = std::numeric_limits<double>::min();
  return p;
}

PairedTestResult paired_t_test(const SeedSeries& a, const SeedSeries& b) {
  std::vector<double> diffs = paired_diffs(a, b);
  MeanStd ms = mean_std(diffs);
  if (ms.std == 0.0)
    throw DegenerateDifferencesError("paired differences have zero variance (" +
                                     a.label + " vs " + b.label + ")");
  PairedTestResult out;
  out.dof = ms.n - 1;
  out.t = ms.mean * std::sqrt(static_cast<double>(ms.n)) / ms.std;
  out.p = t_two_tailed_p(out.t, out.dof);
  return out;
}

double cohens_d_paired(const SeedSeries& a, const SeedSeries& b) {
  std::vector<double> diffs = paired_diffs(a, b);
  MeanStd ms = mean_std(diffs);
  if (ms.std == 0.0)
    throw DegenerateDifferencesError("paired differences have zero variance (" +
                                     a.label + " vs " + b.label + ")");
  return ms.mean / ms.std;
}

std::string format_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", p);
  return buf;
}

}  // namespace bread
