#pragma once

#include <cstdint>
#include <vector>

namespace trimcp {

struct BetaParams {
  double a;
  double b;
};

struct BinomialParams {
  std::int64_t m;
  double mu;
};

// Regularised incomplete beta I_x(a, b), the Beta(a, b) CDF at x.
double reg_inc_beta(double x, BetaParams p);

// Complement 1 - I_x(a, b), accurate when I_x is close to one.
double reg_inc_beta_complement(double x, BetaParams p);

// Inverse of reg_inc_beta in x: returns v with I_v(a, b) = u.
double beta_quantile(double u, BetaParams p);

struct BinomialPoint {
  double pmf;
  double cdf;
};

// Probability mass at k and lower CDF P(N <= k) for N ~ Binomial(m, mu).
BinomialPoint binom_pmf_cdf(std::int64_t k, BinomialParams p);

// Binomial pmf values restricted to the window around the mode where the
// mass is at least `cutoff`. weights[i] is the pmf at first + i.
struct BinomialWeights {
  std::int64_t first = 0;
  std::vector<double> weights;
};
BinomialWeights binomial_weights(BinomialParams p, double cutoff = 1e-15);

// One-sided Clopper-Pearson lower confidence bound for a binomial proportion.
double clopper_pearson_lower(std::int64_t successes, std::int64_t trials, double beta);
// Matching upper bound: 1 when successes == trials.
double clopper_pearson_upper(std::int64_t successes, std::int64_t trials, double beta);

enum class Sidedness { one_sided, two_sided };

// DKW/Massart radius sqrt(log(c * union_count / budget) / (2n)), c = 2 or 1.
double dkw_radius(std::int64_t n, double budget, Sidedness side, std::int64_t union_count = 1);

// Hoeffding tail exp(-2 n eta^2), clamped to [0, 1].
double hoeffding_tail(std::int64_t n, double eta);

double normal_cdf(double z);
// Upper tail 1 - normal_cdf(z) without cancellation.
double normal_sf(double z);
double normal_pdf(double z);
double normal_quantile(double u);

// Gauss-Legendre rule mapped to [0, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
// Cached per order; safe to call concurrently.
const QuadratureRule& gauss_legendre_unit(int order);

}  // namespace trimcp
