#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "oracles.hpp"
#include "trimcp/anomaly.hpp"
#include "trimcp/errors.hpp"
#include "trimcp/population.hpp"

using namespace trimcp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ContaminationScene toy_scene(double t) {
  auto clean = std::make_shared<DiscreteComponent>(
      std::vector<JointAtom>{{1.0, 0.0, 0.4}, {2.0, 1.0, 0.3}, {3.0, 2.0, 0.3}}, "clean");
  auto dirty = std::make_shared<DiscreteComponent>(std::vector<JointAtom>{{5.0, 0.0, 0.2}, {6.0, 3.0, 0.8}}, "dirty");
  return {clean, dirty, 0.3, t};
}

ContaminationScene gaussian_scene(double t, double dirty_shift) {
  auto score = std::make_shared<MahalanobisCovariateScore>(0.0, 1.0);
  auto clean = std::make_shared<RegressionComponent>("clean", GaussianCovariate{0.0, 1.0},
                                                     ResponseModel{0.0, 1.0, 0.6, 0.36}, LinearBackbone{}, score);
  auto dirty = std::make_shared<RegressionComponent>("dirty", GaussianCovariate{dirty_shift, 1.0},
                                                     ResponseModel{0.0, 1.0, 0.05, 0.0}, LinearBackbone{}, score);
  return {clean, dirty, 0.2, t};
}

}  // namespace

TEST_CASE("retained profile of a finite joint law, worked by hand") {
  const RetainedProfile pr = derive_retained_profile(toy_scene(1.0));
  CHECK(pr.p_c == doctest::Approx(0.7));
  CHECK(pr.p_d == doctest::Approx(0.2));
  CHECK(pr.mu_keep == doctest::Approx(0.55));
  CHECK(pr.eps_tilde == doctest::Approx(0.06 / 0.55));
  CHECK(pr.law_r->cdf(1.0) == doctest::Approx(0.28 / 0.55));
  CHECK(pr.law_r->cdf(2.0) == doctest::Approx(0.49 / 0.55));
  CHECK(pr.law_r->cdf(4.9) == doctest::Approx(0.49 / 0.55));
  CHECK(pr.law_r->cdf(5.0) == doctest::Approx(1.0));
  CHECK(pr.law_p_keep->cdf(1.0) == doctest::Approx(0.4 / 0.7));
  CHECK(pr.law_q_keep->cdf(5.0) == doctest::Approx(1.0));
  CHECK(pr.law_q_keep->cdf(4.99) == 0.0);
  REQUIRE(pr.law_p_drop);
  CHECK(pr.law_p_drop->cdf(2.99) == 0.0);
  CHECK(pr.law_p_drop->cdf(3.0) == doctest::Approx(1.0));
  CHECK(pr.provenance.analytic);

  // sup (F_Pkeep - F_P) = 0.3 at a = 2; the retained dirty atom sits above all clean mass.
  CHECK(mixture_upper_bound(pr) == doctest::Approx((1.0 - pr.eps_tilde) * 0.3));
  // The realised one-sided shift of R never exceeds the mixture bound.
  CHECK(sup_cdf_gap(*pr.law_r, *pr.law_p, GapSide::plus) <= mixture_upper_bound(pr) + 1e-15);
}

TEST_CASE("joint CDF and retention of a discrete component") {
  const auto scene = toy_scene(1.0);
  CHECK(scene.clean->retention(1.0) == doctest::Approx(0.7));
  CHECK(scene.clean->retention(-0.1) == 0.0);
  CHECK(scene.clean->joint_cdf(1.5, 1.0) == doctest::Approx(0.4));
  CHECK(scene.clean->joint_cdf(2.0, 2.0) == doctest::Approx(0.7));
  CHECK(scene.clean->kept_law(-1.0) == nullptr);
  CHECK(scene.clean->dropped_law(5.0) == nullptr);
}

TEST_CASE("no trimming leaves the contamination level unchanged") {
  const RetainedProfile pr = derive_retained_profile(toy_scene(kInf));
  CHECK(pr.p_c == 1.0);
  CHECK(pr.p_d == 1.0);
  CHECK(std::fabs(pr.eps_tilde - 0.3) <= 1e-12);
  CHECK(pr.law_p_drop == nullptr);
}

TEST_CASE("equal retention keeps eps_tilde at eps") {
  // Clean and dirty share the same S marginal, so p_c == p_d for every t.
  auto clean = std::make_shared<DiscreteComponent>(std::vector<JointAtom>{{1.0, 0.0, 0.5}, {2.0, 1.0, 0.5}});
  auto dirty = std::make_shared<DiscreteComponent>(std::vector<JointAtom>{{7.0, 0.0, 0.5}, {9.0, 1.0, 0.5}});
  for (double eps : {0.05, 0.2, 0.45}) {
    const RetainedProfile pr = derive_retained_profile({clean, dirty, eps, 0.5});
    CHECK(std::fabs(pr.eps_tilde - eps) <= 1e-12);
  }
}

TEST_CASE("degenerate retention and invalid scenes") {
  CHECK_THROWS_AS(derive_retained_profile(toy_scene(-1.0)), DegenerateRetention);
  auto s = toy_scene(1.0);
  s.epsilon = 1.2;
  CHECK_THROWS(s.validate());
  // All clean mass trimmed while dirty mass survives: P_keep is undefined.
  auto clean = std::make_shared<DiscreteComponent>(std::vector<JointAtom>{{1.0, 5.0, 1.0}});
  auto dirty = std::make_shared<DiscreteComponent>(std::vector<JointAtom>{{2.0, 0.0, 1.0}});
  const RetainedProfile pr = derive_retained_profile({clean, dirty, 0.5, 1.0});
  CHECK(pr.p_c == 0.0);
  CHECK(pr.law_p_keep == nullptr);
  CHECK_THROWS_AS(mixture_upper_bound(pr), MissingComponent);
  CHECK_THROWS(DiscreteComponent({{1.0, 0.0, 0.5}}));
}

TEST_CASE("Gaussian regression scene: analytic retention") {
  const double t = 1.5;
  const auto scene = gaussian_scene(t, 2.0);
  const RetainedProfile pr = derive_retained_profile(scene);
  const double r = std::sqrt(t);
  CHECK(pr.p_c == doctest::Approx(2.0 * oracle::phi(r) - 1.0).epsilon(1e-12));
  CHECK(pr.p_d == doctest::Approx(oracle::phi(r - 2.0) - oracle::phi(-r - 2.0)).epsilon(1e-12));
  CHECK(pr.eps_tilde == doctest::Approx(0.2 * pr.p_d / pr.mu_keep).epsilon(1e-12));
}

TEST_CASE("Monte Carlo profile agrees with the analytic one") {
  const auto scene = gaussian_scene(2.0, 1.5);
  const RetainedProfile exact = derive_retained_profile(scene);
  const RetainedProfile mc = derive_retained_profile(scene, MonteCarloProfile{200000, 99});
  CHECK_FALSE(mc.provenance.analytic);
  CHECK(mc.provenance.samples == 200000);
  CHECK(std::fabs(mc.p_c - exact.p_c) < 4.0 * mc.provenance.se_p_c + 1e-12);
  CHECK(std::fabs(mc.p_d - exact.p_d) < 4.0 * mc.provenance.se_p_d + 1e-12);
  CHECK(mc.provenance.dkw_p_c > 0.0);
  CHECK(mc.q_keep_reliable);
  for (double a : {0.2, 0.6, 1.2}) {
    CHECK(std::fabs(mc.law_r->cdf(a) - exact.law_r->cdf(a)) < 0.01);
  }
}

TEST_CASE("joint CDF of a regression component against simulation") {
  const auto scene = gaussian_scene(1.0, 0.0);
  Rng rng = make_rng(17);
  const int n = 200000;
  int hit = 0;
  for (int i = 0; i < n; ++i) {
    const ScorePair p = scene.clean->draw(rng);
    hit += (p.a <= 0.5 && p.s <= 1.0) ? 1 : 0;
  }
  const double want = scene.clean->joint_cdf(0.5, 1.0);
  CHECK(std::fabs(static_cast<double>(hit) / n - want) < 4.0 * std::sqrt(want * (1 - want) / n));
  CHECK(want == doctest::Approx(scene.clean->kept_law(1.0)->cdf(0.5) * scene.clean->retention(1.0)).epsilon(1e-12));
}

TEST_CASE("contaminated draws follow the mixing weight") {
  const auto scene = toy_scene(1.0);
  Rng rng = make_rng(5);
  int dirty_count = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    bool dirty = false;
    const ScorePair p = draw_contaminated(scene, rng, dirty);
    if (dirty) {
      ++dirty_count;
      CHECK((p.a == 5.0 || p.a == 6.0));
    }
  }
  CHECK(std::fabs(dirty_count / static_cast<double>(n) - 0.3) < 4.0 * std::sqrt(0.21 / n));
}
