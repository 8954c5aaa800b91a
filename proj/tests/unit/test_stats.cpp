#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bread/errors.hpp"
#include "bread/stats.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bread;

namespace {

nlohmann::json load_oracle() {
  std::ifstream in(bread_test::data_path("stats_oracle.json"));
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

SeedSeries series(const char* label, std::vector<double> values) {
  return {label, std::move(values)};
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("mean_std on hand-computed values") {
  MeanStd ms = mean_std({0.52, 0.61, 0.55, 0.49, 0.58});
  CHECK(ms.mean == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(ms.std == doctest::Approx(0.047434164902525694).epsilon(1e-12));
  CHECK(ms.n == 5);

  MeanStd two = mean_std({0.0, 1.0});
  CHECK(two.mean == doctest::Approx(0.5));
  CHECK(two.std == doctest::Approx(0.7071067811865476).epsilon(1e-12));

  CHECK_THROWS_AS(mean_std({1.0}), Error);
  CHECK_THROWS_AS(mean_std({}), Error);
}

TEST_CASE("paired t-test on a hand-computed example") {
  SeedSeries a = series("baseline", {60, 62, 58, 61, 59});
  SeedSeries b = series("treated", {64, 65, 63, 66, 62});
  PairedTestResult r = paired_t_test(a, b);
  CHECK(r.dof == 4);
  CHECK(r.t == doctest::Approx(8.944271909999159).epsilon(1e-10));
  CHECK(r.p == doctest::Approx(0.0008642110288826973).epsilon(1e-6));
  CHECK(cohens_d_paired(a, b) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("paired results match the frozen reference fixtures") {
  nlohmann::json oracle = load_oracle();
  const auto& fixtures = oracle.at("paired_fixtures");
  REQUIRE(fixtures.size() == 100);
  for (size_t i = 0; i < fixtures.size(); ++i) {
    CAPTURE(i);
    const auto& f = fixtures[i];
    SeedSeries a = series("a", f.at("a").get<std::vector<double>>());
    SeedSeries b = series("b", f.at("b").get<std::vector<double>>());

    MeanStd ms = mean_std(a.values);
    CHECK(ms.mean == doctest::Approx(f.at("mean_a").get<double>()).epsilon(1e-9));
    CHECK(ms.std == doctest::Approx(f.at("std_a").get<double>()).epsilon(1e-9));

    PairedTestResult r = paired_t_test(a, b);
    CHECK(r.dof == f.at("dof").get<int>());
    CHECK(std::fabs(r.t - f.at("t").get<double>()) <= 1e-6);
    CHECK(std::fabs(r.p - f.at("p").get<double>()) <= 1e-6);

    double d = cohens_d_paired(a, b);
    CHECK(std::fabs(d - f.at("d").get<double>()) <= 1e-6);

    // Paired t and paired d are the same statistic up to sqrt(n).
    CHECK(std::fabs(r.t - d * std::sqrt(static_cast<double>(ms.n))) <= 1e-10);
  }
}

TEST_CASE("two-tailed tail probabilities match the frozen table") {
  nlohmann::json oracle = load_oracle();
  for (const auto& row : oracle.at("t_tail")) {
    CAPTURE(row.dump());
    double p = t_two_tailed_p(row.at("t").get<double>(), row.at("dof").get<int>());
    CHECK(std::fabs(p - row.at("p_two_tailed").get<double>()) <= 1e-9);
  }
}

TEST_CASE("incomplete beta reproduces closed forms") {
  for (double x : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    CAPTURE(x);
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    CHECK(incomplete_beta(2.0, 1.0, x) == doctest::Approx(x * x).epsilon(1e-12));
    CHECK(incomplete_beta(1.0, 3.0, x) ==
          doctest::Approx(1.0 - std::pow(1.0 - x, 3.0)).epsilon(1e-12));
    CHECK(incomplete_beta(0.5, 0.5, x) ==
          doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-12));
    // Symmetry of the regularized function.
    CHECK(incomplete_beta(2.5, 0.5, x) ==
          doctest::Approx(1.0 - incomplete_beta(0.5, 2.5, 1.0 - x)).epsilon(1e-10));
  }
  CHECK(incomplete_beta(3.0, 2.0, 0.0) == 0.0);
  CHECK(incomplete_beta(3.0, 2.0, 1.0) == 1.0);
}

TEST_CASE("tail probability edge behavior") {
  CHECK(t_two_tailed_p(0.0, 4) == doctest::Approx(1.0));
  double tiny = t_two_tailed_p(1e8, 4);
  CHECK(tiny > 0.0);
  CHECK(tiny < 1e-30);
  for (double t : {0.3, 1.0, 2.5, 7.0}) {
    double p = t_two_tailed_p(t, 6);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK(t_two_tailed_p(-t, 6) == doctest::Approx(p).epsilon(1e-14));
  }
  CHECK_THROWS_AS(t_two_tailed_p(1.0, 0), Error);
}

TEST_CASE("swapping the series flips the signs but not p") {
  SeedSeries a = series("a", {0.5, 0.6, 0.55, 0.7});
  SeedSeries b = series("b", {0.6, 0.72, 0.6, 0.8});
  PairedTestResult fwd = paired_t_test(a, b);
  PairedTestResult rev = paired_t_test(b, a);
  CHECK(fwd.t == doctest::Approx(-rev.t).epsilon(1e-12));
  CHECK(fwd.p == doctest::Approx(rev.p).epsilon(1e-12));
  CHECK(cohens_d_paired(a, b) == doctest::Approx(-cohens_d_paired(b, a)).epsilon(1e-12));
}

TEST_CASE("a constant shift of both series changes nothing") {
  SeedSeries a = series("a", {0.5, 0.6, 0.55, 0.7, 0.66});
  SeedSeries b = series("b", {0.6, 0.72, 0.6, 0.8, 0.7});
  SeedSeries a2 = a;
  SeedSeries b2 = b;
  for (double& v : a2.values) v += 0.17;
  for (double& v : b2.values) v += 0.17;
  PairedTestResult r1 = paired_t_test(a, b);
  PairedTestResult r2 = paired_t_test(a2, b2);
  CHECK(r1.t == doctest::Approx(r2.t).epsilon(1e-12));
  CHECK(r1.p == doctest::Approx(r2.p).epsilon(1e-12));
}

TEST_CASE("degenerate differences raise instead of reporting p=0") {
  SeedSeries a = series("a", {1.0, 2.0, 3.0});
  SeedSeries b = series("b", {2.0, 3.0, 4.0});
  CHECK_THROWS_AS(paired_t_test(a, b), DegenerateDifferencesError);
  CHECK_THROWS_AS(cohens_d_paired(a, b), DegenerateDifferencesError);

  SeedSeries same = series("same", {0.4, 0.5, 0.6});
  CHECK_THROWS_AS(paired_t_test(same, same), DegenerateDifferencesError);
}

TEST_CASE("misuse of the paired test is rejected") {
  CHECK_THROWS_AS(paired_t_test(series("a", {1, 2}), series("b", {1, 2, 3})), Error);
  CHECK_THROWS_AS(paired_t_test(series("a", {1}), series("b", {2})), Error);
}

TEST_CASE("format_p prints four decimals") {
  CHECK(format_p(0.0008642110288826973) == "0.0009");
  CHECK(format_p(1.0) == "1.0000");
  CHECK(format_p(0.05141) == "0.0514");
  CHECK(format_p(4.9e-324) == "0.0000");
}

}  // TEST_SUITE
