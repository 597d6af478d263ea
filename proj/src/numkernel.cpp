#include "trimcp/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/legendre.hpp>

namespace trimcp {
namespace {

void check_shapes(BetaParams p) {
  if (!(p.a > 0.0) || !(p.b > 0.0) || !std::isfinite(p.a) || !std::isfinite(p.b)) {
    throw std::domain_error("beta shapes must be positive and finite");
  }
}

void check_binomial(BinomialParams p) {
  if (p.m < 0) throw std::domain_error("binomial trials must be nonnegative");
  if (!(p.mu >= 0.0 && p.mu <= 1.0)) throw std::domain_error("binomial probability must lie in [0,1]");
}

}  // namespace

double reg_inc_beta(double x, BetaParams p) {
  check_shapes(p);
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("reg_inc_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  return boost::math::ibeta(p.a, p.b, x);
}

double reg_inc_beta_complement(double x, BetaParams p) {
  check_shapes(p);
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("reg_inc_beta_complement: x outside [0,1]");
  if (x == 0.0) return 1.0;
  if (x == 1.0) return 0.0;
  return boost::math::ibetac(p.a, p.b, x);
}

double beta_quantile(double u, BetaParams p) {
  check_shapes(p);
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("beta_quantile: u outside (0,1)");
  return boost::math::ibeta_inv(p.a, p.b, u);
}

BinomialPoint binom_pmf_cdf(std::int64_t k, BinomialParams p) {
  check_binomial(p);
  if (k < 0 || k > p.m) throw std::domain_error("binom_pmf_cdf: k outside [0, m]");
  if (p.mu == 0.0) return {k == 0 ? 1.0 : 0.0, 1.0};
  if (p.mu == 1.0) return {k == p.m ? 1.0 : 0.0, k == p.m ? 1.0 : 0.0};
  const boost::math::binomial_distribution<double> dist(static_cast<double>(p.m), p.mu);
  const double kk = static_cast<double>(k);
  return {boost::math::pdf(dist, kk), boost::math::cdf(dist, kk)};
}

BinomialWeights binomial_weights(BinomialParams p, double cutoff) {
  check_binomial(p);
  BinomialWeights out;
  if (p.mu == 0.0 || p.m == 0) {
    out.first = 0;
    out.weights = {1.0};
    return out;
  }
  if (p.mu == 1.0) {
    out.first = p.m;
    out.weights = {1.0};
    return out;
  }
  const boost::math::binomial_distribution<double> dist(static_cast<double>(p.m), p.mu);
  const auto pmf = [&](std::int64_t k) { return boost::math::pdf(dist, static_cast<double>(k)); };
  const std::int64_t mode =
      std::min<std::int64_t>(p.m, static_cast<std::int64_t>(std::floor((p.m + 1) * p.mu)));
  std::int64_t lo = mode;
  while (lo > 0 && pmf(lo - 1) >= cutoff) --lo;
  std::int64_t hi = mode;
  while (hi < p.m && pmf(hi + 1) >= cutoff) ++hi;
  out.first = lo;
  out.weights.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t k = lo; k <= hi; ++k) out.weights.push_back(pmf(k));
  return out;
}

double clopper_pearson_lower(std::int64_t successes, std::int64_t trials, double beta) {
  if (trials < 1) throw std::domain_error("clopper_pearson_lower: need at least one trial");
  if (successes < 0 || successes > trials) throw std::domain_error("clopper_pearson_lower: successes outside [0, n]");
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("clopper_pearson_lower: beta outside (0,1)");
  if (successes == 0) return 0.0;
  return beta_quantile(beta, {static_cast<double>(successes), static_cast<double>(trials - successes + 1)});
}

double clopper_pearson_upper(std::int64_t successes, std::int64_t trials, double beta) {
  if (trials < 1) throw std::domain_error("clopper_pearson_upper: need at least one trial");
  if (successes < 0 || successes > trials) throw std::domain_error("clopper_pearson_upper: successes outside [0, n]");
  return 1.0 - clopper_pearson_lower(trials - successes, trials, beta);
}

double dkw_radius(std::int64_t n, double budget, Sidedness side, std::int64_t union_count) {
  if (n < 1) throw std::domain_error("dkw_radius: n must be positive");
  if (!(budget > 0.0 && budget < 1.0)) throw std::domain_error("dkw_radius: budget outside (0,1)");
  if (union_count < 1) throw std::domain_error("dkw_radius: union count must be positive");
  const double c = side == Sidedness::two_sided ? 2.0 : 1.0;
  return std::sqrt(std::log(c * static_cast<double>(union_count) / budget) / (2.0 * static_cast<double>(n)));
}

double hoeffding_tail(std::int64_t n, double eta) {
  if (n < 1) throw std::domain_error("hoeffding_tail: n must be positive");
  if (!(eta >= 0.0)) throw std::domain_error("hoeffding_tail: eta must be nonnegative");
  return std::clamp(std::exp(-2.0 * static_cast<double>(n) * eta * eta), 0.0, 1.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    if (u == 0.0) return -INFINITY;
    if (u == 1.0) return INFINITY;
    throw std::domain_error("normal_quantile: u outside [0,1]");
  }
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

const QuadratureRule& gauss_legendre_unit(int order) {
  if (order < 1) throw std::domain_error("gauss_legendre_unit: order must be positive");
  static std::mutex guard;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(guard);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // legendre_p_zeros returns the nonnegative roots on [-1, 1].
  const std::vector<double> half = boost::math::legendre_p_zeros<double>(order);
  std::vector<double> roots;
  for (double x : half) {
    roots.push_back(x);
    if (x != 0.0) roots.push_back(-x);
  }
  std::sort(roots.begin(), roots.end());
  QuadratureRule rule;
  for (double x : roots) {
    const double dp = boost::math::legendre_p_prime<double>(order, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes.push_back(0.5 * (x + 1.0));
    rule.weights.push_back(0.5 * w);
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

}  // namespace trimcp
