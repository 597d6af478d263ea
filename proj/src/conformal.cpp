#include "trimcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "trimcp/rng.hpp"

namespace trimcp {

void CalibrationSample::validate() const {
  if (!labels.empty() && labels.size() != points.size()) {
    throw std::invalid_argument("CalibrationSample: labels and points differ in length");
  }
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("conformal_rank: alpha outside (0,1)");
  const double x = static_cast<double>(n + 1) * (1.0 - alpha);
  auto r = static_cast<std::size_t>(std::ceil(x));
  // (n + 1)(1 - alpha) that is an integer up to rounding must not round up.
  if (r > 0 && static_cast<double>(r - 1) >= x - 1e-9 * std::max(1.0, x)) --r;
  return std::clamp<std::size_t>(r, 1, n + 1);
}

TrimOutcome trim_and_calibrate(const CalibrationSample& sample, double t_star, double alpha, const TieBreaking& ties) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("trim_and_calibrate: alpha outside (0,1)");
  sample.validate();
  TrimOutcome out;
  for (std::size_t i = 0; i < sample.points.size(); ++i) {
    if (sample.points[i].s <= t_star) out.keep_indices.push_back(i);
  }
  out.n_keep = out.keep_indices.size();
  const std::size_t r = conformal_rank(out.n_keep, alpha);
  if (out.n_keep == 0 || r == out.n_keep + 1) {
    out.degenerate = true;
    out.tau_hat = std::numeric_limits<double>::infinity();
    return out;
  }
  out.degenerate = false;
  out.r_keep = r;
  if (!ties.randomize) {
    std::vector<double> a;
    a.reserve(out.n_keep);
    for (std::size_t i : out.keep_indices) a.push_back(sample.points[i].a);
    std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(r - 1), a.end());
    out.tau_hat = a[r - 1];
    return out;
  }
  Rng rng = make_rng(ties.seed);
  std::vector<std::pair<double, double>> keyed;
  keyed.reserve(out.n_keep);
  for (std::size_t i : out.keep_indices) keyed.emplace_back(sample.points[i].a, uniform01(rng));
  std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(r - 1), keyed.end());
  out.tau_hat = keyed[r - 1].first;
  out.tie_key = keyed[r - 1].second;
  return out;
}

PredictionInterval predict_interval(double x_center, double tau_hat) {
  if (std::isinf(tau_hat) && tau_hat > 0.0) {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  if (!(tau_hat >= 0.0)) throw std::domain_error("predict_interval: cutoff must be nonnegative");
  return {x_center - tau_hat, x_center + tau_hat};
}

double empirical_coverage(const TrimOutcome& outcome, const ScoreLaw& target, const CoverageMode& mode) {
  if (outcome.degenerate) return 1.0;
  const double tau = outcome.tau_hat;
  if (std::holds_alternative<ExactCdf>(mode)) {
    if (!outcome.tie_key) return target.cdf(tau);
    const double below = target.cdf_left(tau);
    return below + (target.cdf(tau) - below) * *outcome.tie_key;
  }
  const auto& mc = std::get<MonteCarloCoverage>(mode);
  if (mc.n_test == 0) throw std::invalid_argument("empirical_coverage: n_test must be positive");
  const std::vector<double> draws = target.sample(mc.seed, mc.n_test);
  std::size_t hit = 0;
  if (!outcome.tie_key) {
    for (double a : draws) hit += a <= tau ? 1 : 0;
  } else {
    Rng rng = make_rng(derive_seed(mc.seed, {1}));
    for (double a : draws) {
      const double key = uniform01(rng);
      hit += (a < tau || (a == tau && key <= *outcome.tie_key)) ? 1 : 0;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(mc.n_test);
}

}  // namespace trimcp
