#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "trimcp/anomaly.hpp"
#include "trimcp/numkernel.hpp"

using namespace trimcp;

namespace {

double region_mass(const std::vector<CovariateInterval>& region, double mean, double sd) {
  double m = 0.0;
  for (const auto& iv : region) m += oracle::phi((iv.hi - mean) / sd) - oracle::phi((iv.lo - mean) / sd);
  return m;
}

}  // namespace

TEST_CASE("Stein score norm closed form") {
  const SteinScoreConfig cfg{0.3, 1.4, 0.8};
  CHECK(stein_score_norm(0.3, cfg) == doctest::Approx(1.0 / 0.8));
  double prev = 0.0;
  for (double d = 0.0; d < 5.0; d += 0.25) {
    const double v = stein_score_norm(0.3 + d, cfg);
    CHECK(v == doctest::Approx(stein_score_norm(0.3 - d, cfg)));
    if (d > 0.0) CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS(SteinScoreConfig({0.0, 0.0, 1.0}).validate());
  CHECK_THROWS(SteinScoreConfig({0.0, 1.0, -1.0}).validate());
}

TEST_CASE("Stein kernel diagonal agrees with finite differences") {
  // h(u, v) = s(u) s(v) k + s(u) dk/dv + s(v) dk/du + d2k/dudv, evaluated at u = v.
  const SteinScoreConfig cfg{-0.2, 0.9, 0.7};
  const double h = cfg.bandwidth;
  auto s = [&](double u) { return -(u - cfg.mu_hat) / (cfg.sigma_hat * cfg.sigma_hat); };
  auto k = [&](double u, double v) { return std::exp(-(u - v) * (u - v) / (2.0 * h * h)); };
  const double e = 1e-4;
  for (double x : {-3.0, -0.2, 0.5, 2.7}) {
    const double dku = (k(x + e, x) - k(x - e, x)) / (2 * e);
    const double dkv = (k(x, x + e) - k(x, x - e)) / (2 * e);
    const double dkuv = (k(x + e, x + e) - k(x + e, x - e) - k(x - e, x + e) + k(x - e, x - e)) / (4 * e * e);
    const double hxx = s(x) * s(x) * k(x, x) + s(x) * dkv + s(x) * dku + dkuv;
    CHECK(std::sqrt(std::max(hxx, 0.0)) == doctest::Approx(stein_score_norm(x, cfg)).epsilon(1e-6));
  }
}

TEST_CASE("Stein retained region is the sublevel set") {
  SteinCovariateScore score({1.0, 2.0, 0.5});
  CHECK(score.retained_region(1.0).empty());  // below the floor 1/h = 2
  const auto region = score.retained_region(3.0);
  REQUIRE(region.size() == 1);
  CHECK(score(region[0].hi) == doctest::Approx(3.0));
  CHECK(score(region[0].lo) == doctest::Approx(3.0));
  CHECK(score(1.0) <= 3.0);
}

TEST_CASE("median heuristic") {
  CHECK(median_heuristic_bandwidth(std::vector<double>{0.0, 1.0}) == 1.0);
  CHECK(median_heuristic_bandwidth(std::vector<double>{0.0, 1.0, 2.0}) == 1.0);
  // Four points give six differences {1, 2, 3, 1, 2, 1}: middle pair (1, 2).
  CHECK(median_heuristic_bandwidth(std::vector<double>{0.0, 1.0, 2.0, 3.0}) == doctest::Approx(1.5));
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z;
  std::vector<double> v(300);
  for (auto& x : v) x = z(gen);
  const double h = median_heuristic_bandwidth(v);
  for (double c : {2.5, -0.4}) {
    std::vector<double> w = v;
    for (auto& x : w) x = c * x + 7.0;
    CHECK(median_heuristic_bandwidth(w) == doctest::Approx(std::fabs(c) * h).epsilon(1e-12));
  }
  std::vector<double> big(5000);
  for (auto& x : big) x = z(gen);
  CHECK(median_heuristic_bandwidth(big, 3) == median_heuristic_bandwidth(big, 3));
  // Median |Z1 - Z2| for standard normals is sqrt(2) * 0.6745.
  CHECK(median_heuristic_bandwidth(big, 3) == doctest::Approx(std::sqrt(2.0) * 0.6744897501960817).epsilon(0.05));
  CHECK_THROWS(median_heuristic_bandwidth(std::vector<double>{2.0, 2.0, 2.0}));
  CHECK_THROWS(median_heuristic_bandwidth(std::vector<double>{2.0}));
}

TEST_CASE("Mahalanobis score") {
  const std::vector<double> mu = {1.0, -1.0};
  const std::vector<double> eye = {1.0, 0.0, 0.0, 1.0};
  CHECK(mahalanobis_score(mu, mu, eye) == 0.0);
  const std::vector<double> x = {3.0, 0.0};
  CHECK(mahalanobis_score(x, mu, eye) == doctest::Approx(5.0));
  // Sigma = diag(4, 1): W = diag(1/2, 1).
  const std::vector<double> w = {0.5, 0.0, 0.0, 1.0};
  CHECK(mahalanobis_score(x, mu, w) == doctest::Approx(2.0));
  const std::vector<double> one = {2.0}, zero = {0.0}, unit = {1.0};
  CHECK(mahalanobis_score(one, zero, unit) == 4.0);
  CHECK_THROWS(mahalanobis_score(x, one, eye));
  MahalanobisCovariateScore m1(0.0, 1.0);
  CHECK(m1(2.0) == 4.0);
}

TEST_CASE("chi-square threshold retains q of the clean Gaussian") {
  const double q = 0.95;
  const double t = std::pow(normal_quantile(0.5 + q / 2.0), 2);  // chi-square(1) quantile
  MahalanobisCovariateScore score(2.0, 3.0);
  CHECK(region_mass(score.retained_region(t), 2.0, 3.0) == doctest::Approx(q).epsilon(1e-12));
  std::mt19937_64 gen(10);
  std::normal_distribution<double> x(2.0, 3.0);
  const int n = 1000000;
  int kept = 0;
  for (int i = 0; i < n; ++i) kept += score(x(gen)) <= t;
  CHECK(std::fabs(kept / static_cast<double>(n) - q) <= 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST_CASE("threshold policies") {
  MahalanobisCovariateScore score(0.0, 1.0);
  CHECK(resolve_threshold(ExplicitThreshold{2.5}, score, std::nullopt).value() == 2.5);
  CHECK(resolve_threshold(ExplicitThreshold{2.5}, score, std::nullopt).source == "explicit");
  const ResolvedThreshold grid = resolve_threshold(ThresholdGrid{{1.0, 2.0}}, score, std::nullopt);
  CHECK(grid.values == std::vector<double>{1.0, 2.0});
  CHECK_THROWS(grid.value());

  const double tp = resolve_threshold(PopulationQuantile{0.99}, score, GaussianCovariate{0.0, 1.0}).value();
  CHECK(tp == doctest::Approx(std::pow(normal_quantile(0.995), 2)).epsilon(1e-9));
  CHECK_THROWS(resolve_threshold(PopulationQuantile{0.99}, score, std::nullopt));

  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  std::vector<double> ref(512);
  for (auto& v : ref) v = z(gen);
  std::vector<double> s;
  for (double v : ref) s.push_back(score(v));
  std::sort(s.begin(), s.end());
  const double want = s[static_cast<std::size_t>(std::ceil(512 * 0.95)) - 1];
  CHECK(resolve_threshold(ReferenceQuantile{0.95}, score, std::nullopt, ref).value() == want);
  CHECK(reference_score_quantile(score, ref, 0.95) == want);
  CHECK_THROWS(resolve_threshold(ReferenceQuantile{0.95}, score, std::nullopt, std::span(ref).first(19)));
  CHECK_NOTHROW(resolve_threshold(ReferenceQuantile{0.95}, score, std::nullopt, std::span(ref).first(20)));
  CHECK_THROWS(validate_policy(PopulationQuantile{1.0}));
  CHECK_THROWS(validate_policy(ReferenceQuantile{0.0}));
  CHECK_FALSE(describe_policy(PopulationQuantile{0.99}).empty());
}

TEST_CASE("population quantile gives exact clean retention for the Stein score") {
  SteinCovariateScore score({0.05, 1.02, 0.95});
  for (double q : {0.95, 0.975, 0.99}) {
    const double t = population_score_quantile(score, {0.0, 1.0}, q);
    CHECK(region_mass(score.retained_region(t), 0.0, 1.0) == doctest::Approx(q).epsilon(1e-10));
  }
}

TEST_CASE("score-visible contamination is rejected by the Stein threshold") {
  SteinScoreConfig cfg{0.0, 1.0, 0.95};
  SteinCovariateScore score(cfg);
  const double t = population_score_quantile(score, {0.0, 1.0}, 0.99);
  std::mt19937_64 gen(12);
  std::normal_distribution<double> xd(6.0, 1.0);
  const int n = 200000;
  int rejected = 0;
  for (int i = 0; i < n; ++i) rejected += score(xd(gen)) > t;
  CHECK(rejected / static_cast<double>(n) >= 0.999);
}
