#include "trimcp/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "trimcp/rng.hpp"

namespace trimcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double region_mass(const std::vector<CovariateInterval>& region, GaussianCovariate x) {
  double s = 0.0;
  for (const auto& iv : region) s += gaussian_interval_mass(x, iv);
  return std::min(s, 1.0);
}

void check_level(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("threshold quantile level must lie in (0,1)");
}

}  // namespace

void SteinScoreConfig::validate() const {
  if (!std::isfinite(mu_hat)) throw std::invalid_argument("SteinScoreConfig: mu_hat must be finite");
  if (!(sigma_hat > 0.0) || !std::isfinite(sigma_hat)) throw std::invalid_argument("SteinScoreConfig: sigma_hat must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("SteinScoreConfig: bandwidth must be positive");
}

double stein_score_norm(double x, const SteinScoreConfig& cfg) {
  const double s = -(x - cfg.mu_hat) / (cfg.sigma_hat * cfg.sigma_hat);
  const double inv_h = 1.0 / cfg.bandwidth;
  return std::sqrt(std::max(s * s + inv_h * inv_h, 0.0));
}

SteinCovariateScore::SteinCovariateScore(SteinScoreConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<CovariateInterval> SteinCovariateScore::retained_region(double t) const {
  if (std::isinf(t) && t > 0.0) return {{-kInf, kInf}};
  const double inv_h = 1.0 / cfg_.bandwidth;
  if (!(t >= inv_h)) return {};
  const double var = cfg_.sigma_hat * cfg_.sigma_hat;
  const double half = var * std::sqrt((t - inv_h) * (t + inv_h));
  return {{cfg_.mu_hat - half, cfg_.mu_hat + half}};
}

MahalanobisCovariateScore::MahalanobisCovariateScore(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!std::isfinite(mu) || !(sigma > 0.0)) throw std::invalid_argument("MahalanobisCovariateScore: invalid parameters");
}

double MahalanobisCovariateScore::operator()(double x) const {
  const double z = (x - mu_) / sigma_;
  return z * z;
}

std::vector<CovariateInterval> MahalanobisCovariateScore::retained_region(double t) const {
  if (std::isinf(t) && t > 0.0) return {{-kInf, kInf}};
  if (!(t >= 0.0)) return {};
  const double half = sigma_ * std::sqrt(t);
  return {{mu_ - half, mu_ + half}};
}

double median_heuristic_bandwidth(std::span<const double> values, std::uint64_t seed) {
  constexpr std::size_t kExactLimit = 2000;
  std::vector<double> v(values.begin(), values.end());
  if (v.size() > kExactLimit) {
    Rng rng = make_rng(seed);
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(kExactLimit);
  }
  std::vector<double> diffs;
  diffs.reserve(v.size() * (v.size() - (v.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) diffs.push_back(std::fabs(v[i] - v[j]));
  }
  if (diffs.empty()) throw std::domain_error("median_heuristic_bandwidth: need at least two values");
  const std::size_t n = diffs.size();
  const auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  double med = *mid;
  if (n % 2 == 0) med = 0.5 * (med + *std::max_element(diffs.begin(), mid));
  if (!(med > 0.0)) throw std::domain_error("median_heuristic_bandwidth: median pairwise distance is zero");
  return med;
}

double mahalanobis_score(std::span<const double> x, std::span<const double> mu, std::span<const double> factor) {
  const std::size_t d = x.size();
  if (mu.size() != d || factor.size() != d * d || d == 0) {
    throw std::invalid_argument("mahalanobis_score: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += factor[i * d + j] * (x[j] - mu[j]);
    s += row * row;
  }
  return s;
}

void validate_policy(const ThresholdPolicy& policy) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PopulationQuantile> || std::is_same_v<T, ReferenceQuantile>) {
          check_level(p.q);
        } else if constexpr (std::is_same_v<T, ExplicitThreshold>) {
          if (std::isnan(p.t)) throw std::invalid_argument("explicit threshold is NaN");
        } else {
          if (p.values.empty()) throw std::invalid_argument("threshold grid is empty");
          for (double v : p.values) {
            if (!std::isfinite(v)) throw std::invalid_argument("threshold grid values must be finite");
          }
        }
      },
      policy);
}

std::string describe_policy(const ThresholdPolicy& policy) {
  if (std::holds_alternative<PopulationQuantile>(policy)) return "population";
  if (std::holds_alternative<ReferenceQuantile>(policy)) return "reference";
  if (std::holds_alternative<ExplicitThreshold>(policy)) return "explicit";
  return "grid";
}

double ResolvedThreshold::value() const {
  if (values.size() != 1) throw std::logic_error("ResolvedThreshold: grid policies carry several values");
  return values.front();
}

double population_score_quantile(const CovariateScore& score, GaussianCovariate clean_x, double q) {
  check_level(q);
  if (!(clean_x.sd > 0.0)) throw std::invalid_argument("population_score_quantile: covariate sd must be positive");
  // Bracket using the score over the bulk of the covariate law.
  double lo = kInf;
  double hi = -kInf;
  for (int i = -400; i <= 400; ++i) {
    const double s = score(clean_x.mean + clean_x.sd * 0.025 * i);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  lo = std::nextafter(lo, -kInf);
  if (region_mass(score.retained_region(lo), clean_x) >= q) return lo;
  while (region_mass(score.retained_region(hi), clean_x) < q) hi = hi > 0.0 ? 2.0 * hi : hi + 1.0;
  for (int it = 0; it < 200 && lo < hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (region_mass(score.retained_region(mid), clean_x) >= q) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double reference_score_quantile(const CovariateScore& score, std::span<const double> reference_x, double q) {
  check_level(q);
  if (reference_x.size() < kMinReferenceSize) {
    throw std::domain_error("reference_score_quantile: reference sample needs at least 20 points");
  }
  std::vector<double> s(reference_x.size());
  std::transform(reference_x.begin(), reference_x.end(), s.begin(), [&](double x) { return score(x); });
  const double n = static_cast<double>(s.size());
  auto k = static_cast<std::size_t>(std::ceil(n * q * (1.0 - 1e-12)));
  k = std::clamp<std::size_t>(k, 1, s.size());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end());
  return s[k - 1];
}

ResolvedThreshold resolve_threshold(const ThresholdPolicy& policy, const CovariateScore& score,
                                    std::optional<GaussianCovariate> clean_x, std::span<const double> reference_x) {
  validate_policy(policy);
  ResolvedThreshold r;
  r.source = describe_policy(policy);
  if (const auto* p = std::get_if<PopulationQuantile>(&policy)) {
    if (!clean_x) throw std::invalid_argument("population threshold needs the clean covariate law");
    r.values = {population_score_quantile(score, *clean_x, p->q)};
  } else if (const auto* p = std::get_if<ReferenceQuantile>(&policy)) {
    r.values = {reference_score_quantile(score, reference_x, p->q)};
  } else if (const auto* p = std::get_if<ExplicitThreshold>(&policy)) {
    r.values = {p->t};
  } else {
    r.values = std::get<ThresholdGrid>(policy).values;
  }
  return r;
}

}  // namespace trimcp
