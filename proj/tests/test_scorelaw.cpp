#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "trimcp/errors.hpp"
#include "trimcp/scorelaw.hpp"

using namespace trimcp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// P(|R| <= a) with X restricted to [lo, hi], by Simpson integration over x.
double residual_cdf_oracle(GaussianCovariate x, ResidualModel r, double lo, double hi, double a) {
  auto dens = [&](double v) { return std::exp(-0.5 * std::pow((v - x.mean) / x.sd, 2)) / (x.sd * std::sqrt(2 * M_PI)); };
  auto inner = [&](double v) {
    const double c = r.offset + r.slope * v;
    const double s = r.noise_base + r.noise_slope * std::fabs(v);
    return dens(v) * (oracle::phi((a - c) / s) - oracle::phi((-a - c) / s));
  };
  const double L = std::max(lo, x.mean - 12 * x.sd), H = std::min(hi, x.mean + 12 * x.sd);
  double num = 0.0, mass = 0.0;
  auto add = [&](double l, double h) {
    if (h <= l) return;
    num += oracle::simpson(inner, l, h, 20000);
    mass += oracle::simpson(dens, l, h, 20000);
  };
  if (L < 0.0 && H > 0.0) {
    add(L, 0.0);
    add(0.0, H);
  } else {
    add(L, H);
  }
  return num / mass;
}

}  // namespace

TEST_CASE("Gaussian and half-normal laws") {
  GaussianLaw g(1.0, 2.0);
  CHECK(g.cdf(1.0) == doctest::Approx(0.5));
  CHECK(g.lower_quantile(0.975) == doctest::Approx(1.0 + 2.0 * 1.959963984540054).epsilon(1e-10));
  HalfNormalLaw h(0.6);
  CHECK(h.cdf(0.6 * 1.6448536269514722) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(h.cdf(-1.0) == 0.0);
  CHECK(h.lower_quantile(0.9) == doctest::Approx(0.6 * 1.6448536269514722).epsilon(1e-10));
  CHECK_THROWS(GaussianLaw(0.0, 0.0));
  CHECK_THROWS(HalfNormalLaw(-1.0));
}

TEST_CASE("empirical law step CDF and inclusive quantile") {
  EmpiricalLaw e({3.0, 1.0, 2.0, 2.0});
  CHECK(e.cdf(0.5) == 0.0);
  CHECK(e.cdf(2.0) == 0.75);
  CHECK(e.cdf_left(2.0) == 0.25);
  CHECK(e.lower_quantile(0.25) == 1.0);
  CHECK(e.lower_quantile(0.26) == 2.0);
  CHECK(e.lower_quantile(0.75) == 2.0);
  CHECK(e.lower_quantile(0.76) == 3.0);
  // Quantile levels that are exact multiples of 1/n despite rounding.
  EmpiricalLaw ten({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(ten.lower_quantile(0.3) == 3.0);
  CHECK(ten.lower_quantile(0.7) == 7.0);
  CHECK_THROWS(EmpiricalLaw({}));
}

TEST_CASE("piecewise-linear and finite discrete laws") {
  PiecewiseLinearCdfLaw p({0.0, 1.0, 2.0}, {0.0, 0.5, 1.0});
  CHECK(p.cdf(0.5) == doctest::Approx(0.25));
  CHECK(p.cdf(3.0) == 1.0);
  CHECK(p.lower_quantile(0.75) == doctest::Approx(1.5));
  CHECK_THROWS(PiecewiseLinearCdfLaw({0.0, 1.0}, {0.0, 0.9}));

  FiniteDiscreteLaw f({2.0, 1.0, 2.0}, {0.25, 0.5, 0.25});
  REQUIRE(f.atoms().size() == 2);
  CHECK(f.masses()[1] == doctest::Approx(0.5));
  CHECK(f.cdf(1.0) == doctest::Approx(0.5));
  CHECK(f.cdf_left(1.0) == 0.0);
  CHECK(f.lower_quantile(0.5) == 1.0);
  CHECK(f.lower_quantile(0.5000001) == 2.0);
  CHECK_THROWS(FiniteDiscreteLaw({1.0}, {0.9}));
  CHECK_THROWS(FiniteDiscreteLaw({1.0, 2.0}, {1.5, -0.5}));
}

TEST_CASE("mixture and conditioned laws") {
  auto a = std::make_shared<FiniteDiscreteLaw>(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5});
  auto b = std::make_shared<GaussianLaw>(0.0, 1.0);
  MixtureLaw m({0.3, 0.7}, {a, b});
  CHECK(m.kind() == LawKind::mixed);
  CHECK(m.cdf(0.0) == doctest::Approx(0.3 * 0.5 + 0.7 * 0.5));
  CHECK(m.cdf_left(0.0) == doctest::Approx(0.35));
  CHECK(m.lower_quantile(m.cdf(0.4)) == doctest::Approx(0.4).epsilon(1e-9));

  ConditionedLaw c(b, 0.0, kInf);
  CHECK(c.acceptance_probability() == doctest::Approx(0.5));
  CHECK(c.cdf(1.0) == doctest::Approx(2.0 * (oracle::phi(1.0) - 0.5)));
  const auto draws = c.sample(5, 2000);
  CHECK(*std::min_element(draws.begin(), draws.end()) >= 0.0);
  CHECK_THROWS_AS(ConditionedLaw(a, 3.0, 4.0), MissingComponent);
}

TEST_CASE("regression residual law matches direct integration") {
  const GaussianCovariate x{0.0, 1.0};
  const ResidualModel hetero{0.0, 0.0, 0.6, 0.36};
  for (auto [lo, hi] : {std::pair{-kInf, kInf}, std::pair{-1.7, 1.9}, std::pair{0.4, 2.5}}) {
    RegressionResidualLaw law(x, hetero, {{lo, hi}});
    for (double a : {0.05, 0.5, 1.0, 2.0, 4.0}) {
      CHECK(law.cdf(a) == doctest::Approx(residual_cdf_oracle(x, hetero, lo, hi, a)).epsilon(1e-8));
    }
    const double q = law.lower_quantile(0.9);
    CHECK(law.cdf(q) == doctest::Approx(0.9).epsilon(1e-10));
  }
  // Shifted covariate with a nonzero slope (fitted-backbone residuals).
  const ResidualModel tilted{0.1, -0.05, 0.05, 0.0};
  RegressionResidualLaw far({6.0, 1.0}, tilted, {{-kInf, 3.0}});
  for (double a : {0.05, 0.2, 0.4}) {
    CHECK(far.cdf(a) == doctest::Approx(residual_cdf_oracle({6.0, 1.0}, tilted, -kInf, 3.0, a)).epsilon(1e-6));
  }
  CHECK(far.region_mass() == doctest::Approx(oracle::phi(-3.0)).epsilon(1e-10));
}

TEST_CASE("regression residual law sampling agrees with its CDF") {
  RegressionResidualLaw law({0.0, 1.0}, {0.0, 0.0, 0.6, 0.36}, {{-1.0, 1.5}});
  const auto draws = law.sample(42, 200000);
  for (double a : {0.3, 0.8, 1.5}) {
    const double frac = static_cast<double>(std::count_if(draws.begin(), draws.end(), [&](double v) { return v <= a; })) /
                        static_cast<double>(draws.size());
    const double p = law.cdf(a);
    CHECK(std::fabs(frac - p) < 4.0 * std::sqrt(p * (1 - p) / draws.size()));
  }
  CHECK(law.sample(42, 10) == law.sample(42, 10));
}

TEST_CASE("sup CDF gaps against brute force") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> atoms_m, atoms_n, mass_m, mass_n;
    for (int i = 0; i < 5; ++i) {
      atoms_m.push_back(std::floor(u(gen) * 10));
      atoms_n.push_back(std::floor(u(gen) * 10));
      mass_m.push_back(u(gen) + 0.01);
      mass_n.push_back(u(gen) + 0.01);
    }
    double sm = 0, sn = 0;
    for (int i = 0; i < 5; ++i) sm += mass_m[i], sn += mass_n[i];
    for (int i = 0; i < 5; ++i) mass_m[i] /= sm, mass_n[i] /= sn;
    FiniteDiscreteLaw M(atoms_m, mass_m), N(atoms_n, mass_n);
    double plus = 0, minus = 0;
    for (double t = -1.0; t <= 11.0; t += 0.5) {
      plus = std::max(plus, M.cdf(t) - N.cdf(t));
      minus = std::max(minus, N.cdf(t) - M.cdf(t));
    }
    const GapExtrema g = cdf_gap_extrema(M, N);
    CHECK(g.plus == doctest::Approx(plus).epsilon(1e-14));
    CHECK(g.minus == doctest::Approx(minus).epsilon(1e-14));
    CHECK(sup_cdf_gap(M, N, GapSide::two_sided) == doctest::Approx(std::max(plus, minus)).epsilon(1e-14));
  }
}

TEST_CASE("sharpness pair has the prescribed one-sided gap") {
  for (double d : {0.0, 0.002, 0.05, 0.3}) {
    const auto [r, p] = make_sharpness_pair(d);
    const GapExtrema g = cdf_gap_extrema(*r, *p);
    CHECK(g.plus == doctest::Approx(d).epsilon(1e-14));
    CHECK(p->cdf(0.5 + d) == doctest::Approx(0.5));
    CHECK(r->cdf(0.25) == doctest::Approx(0.25));
  }
  CHECK_THROWS(make_sharpness_pair(1.5));
}

TEST_CASE("dense gap grid on continuous laws") {
  GaussianLaw a(0.0, 1.0), b(0.5, 1.0);
  // sup (Phi(t) - Phi(t - 0.5)) is attained at t = 0.25.
  CHECK(sup_cdf_gap(a, b, GapSide::plus) == doctest::Approx(2 * oracle::phi(0.25) - 1).epsilon(1e-9));
  CHECK(sup_cdf_gap(a, b, GapSide::minus) == doctest::Approx(0.0).epsilon(1e-12));
}
