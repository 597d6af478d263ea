#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "trimcp/conformal.hpp"

using namespace trimcp;

TEST_CASE("conformal rank") {
  CHECK(conformal_rank(320, 0.1) == 289);
  CHECK(conformal_rank(8, 0.1) == 9);
  CHECK(conformal_rank(9, 0.1) == 9);
  CHECK(conformal_rank(19, 0.05) == 19);
  CHECK(conformal_rank(99, 0.1) == 90);
  CHECK(conformal_rank(0, 0.1) == 1);
  for (std::size_t n = 1; n < 2000; ++n) {
    const auto r = conformal_rank(n, 0.1);
    CHECK(static_cast<double>(r) >= (n + 1) * 0.9 - 1e-9);
    CHECK(static_cast<double>(r) < (n + 1) * 0.9 + 1.0 - 1e-9);
  }
  CHECK_THROWS(conformal_rank(10, 0.0));
}

TEST_CASE("trimmed cutoff equals the sorted order statistic") {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    CalibrationSample cal;
    const std::size_t n = 20 + static_cast<std::size_t>(trial) * 7;
    for (std::size_t i = 0; i < n; ++i) cal.points.push_back({std::fabs(z(gen)), z(gen) * z(gen)});
    const double t = 0.8;
    const TrimOutcome out = trim_and_calibrate(cal, t, 0.1);
    std::vector<double> kept;
    for (const auto& p : cal.points) {
      if (p.s <= t) kept.push_back(p.a);
    }
    std::sort(kept.begin(), kept.end());
    CHECK(out.n_keep == kept.size());
    const std::size_t r = conformal_rank(kept.size(), 0.1);
    if (r > kept.size()) {
      CHECK(out.degenerate);
    } else {
      REQUIRE_FALSE(out.degenerate);
      CHECK(*out.r_keep == r);
      CHECK(out.tau_hat == kept[r - 1]);
    }
  }
}

TEST_CASE("degenerate calibration") {
  CalibrationSample cal;
  for (int i = 0; i < 8; ++i) cal.points.push_back({static_cast<double>(i), 0.0});
  TrimOutcome out = trim_and_calibrate(cal, 1.0, 0.1);
  CHECK(out.degenerate);
  CHECK(std::isinf(out.tau_hat));
  const PredictionInterval iv = predict_interval(3.0, out.tau_hat);
  CHECK(std::isinf(iv.width()));
  out = trim_and_calibrate(cal, -1.0, 0.1);
  CHECK(out.n_keep == 0);
  CHECK(out.degenerate);
  CHECK(empirical_coverage(out, GaussianLaw(0.0, 1.0)) == 1.0);
}

TEST_CASE("ties and randomised tie-breaking") {
  CalibrationSample cal;
  for (int i = 0; i < 19; ++i) cal.points.push_back({i < 10 ? 1.0 : 2.0, 0.0});
  const TrimOutcome plain = trim_and_calibrate(cal, 0.0, 0.5);
  CHECK(plain.tau_hat == 1.0);
  CHECK_FALSE(plain.tie_key.has_value());
  const TrimOutcome rnd = trim_and_calibrate(cal, 0.0, 0.5, {true, 4});
  CHECK(rnd.tau_hat == 1.0);
  REQUIRE(rnd.tie_key.has_value());
  FiniteDiscreteLaw target({1.0, 2.0}, {0.5, 0.5});
  // The tie at the cutoff is covered with probability equal to the key.
  CHECK(empirical_coverage(rnd, target) == doctest::Approx(0.5 * *rnd.tie_key));
  CHECK(empirical_coverage(plain, target) == doctest::Approx(0.5));
}

TEST_CASE("coverage evaluation, exact and sampled") {
  CalibrationSample cal;
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  for (int i = 0; i < 320; ++i) cal.points.push_back({std::fabs(z(gen)), 0.0});
  const TrimOutcome out = trim_and_calibrate(cal, 1.0, 0.1);
  HalfNormalLaw target(1.0);
  const double exact = empirical_coverage(out, target);
  CHECK(exact == doctest::Approx(target.cdf(out.tau_hat)));
  const double mc = empirical_coverage(out, target, MonteCarloCoverage{400000, 3});
  CHECK(std::fabs(mc - exact) < 4.0 * std::sqrt(exact * (1 - exact) / 400000));
  CHECK(empirical_coverage(out, target, MonteCarloCoverage{1000, 3}) ==
        empirical_coverage(out, target, MonteCarloCoverage{1000, 3}));
  CHECK_THROWS(empirical_coverage(out, target, MonteCarloCoverage{0, 3}));
  const PredictionInterval iv = predict_interval(2.0, out.tau_hat);
  CHECK(iv.width() == doctest::Approx(2.0 * out.tau_hat));
  CHECK_THROWS(predict_interval(0.0, -1.0));
}

TEST_CASE("labels must match points") {
  CalibrationSample cal;
  cal.points = {{1.0, 0.0}, {2.0, 0.0}};
  cal.labels = {Origin::clean};
  CHECK_THROWS(trim_and_calibrate(cal, 1.0, 0.1));
}
