#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "trimcp/population.hpp"
#include "trimcp/scorelaw.hpp"

namespace trimcp {

// Plug-in Gaussian score s(u) = -(u - mu_hat) / sigma_hat^2 with an RBF kernel
// of bandwidth h.
struct SteinScoreConfig {
  double mu_hat = 0.0;
  double sigma_hat = 1.0;
  double bandwidth = 1.0;

  void validate() const;
};

// sqrt(h_s(x, x)) for the diagonal Stein kernel, which reduces to
// sqrt(s(x)^2 + 1/h^2).
double stein_score_norm(double x, const SteinScoreConfig& cfg);

class SteinCovariateScore final : public CovariateScore {
 public:
  explicit SteinCovariateScore(SteinScoreConfig cfg);
  double operator()(double x) const override { return stein_score_norm(x, cfg_); }
  std::vector<CovariateInterval> retained_region(double t) const override;
  std::string name() const override { return "stein"; }
  const SteinScoreConfig& config() const { return cfg_; }

 private:
  SteinScoreConfig cfg_;
};

// ((x - mu) / sigma)^2.
class MahalanobisCovariateScore final : public CovariateScore {
 public:
  MahalanobisCovariateScore(double mu, double sigma);
  double operator()(double x) const override;
  std::vector<CovariateInterval> retained_region(double t) const override;
  std::string name() const override { return "mahalanobis"; }

 private:
  double mu_;
  double sigma_;
};

// Median of |v_i - v_j| over pairs i < j. Samples larger than 2000 are
// subsampled to 2000 points with a generator seeded by `seed`.
double median_heuristic_bandwidth(std::span<const double> values, std::uint64_t seed = 0);

// |W (x - mu)|^2 where W is a row-major dim x dim factor with W^T W = Sigma^{-1}.
double mahalanobis_score(std::span<const double> x, std::span<const double> mu, std::span<const double> factor);

struct PopulationQuantile {
  double q;
};
struct ReferenceQuantile {
  double q;
};
// +infinity disables trimming.
struct ExplicitThreshold {
  double t;
};
struct ThresholdGrid {
  std::vector<double> values;
};
using ThresholdPolicy = std::variant<PopulationQuantile, ReferenceQuantile, ExplicitThreshold, ThresholdGrid>;

void validate_policy(const ThresholdPolicy& policy);
std::string describe_policy(const ThresholdPolicy& policy);

struct ResolvedThreshold {
  std::vector<double> values;  // one value unless the policy is a grid
  std::string source;          // population | reference | explicit | grid

  double value() const;
};

inline constexpr std::size_t kMinReferenceSize = 20;

// q-quantile of S(X) for X ~ N(mean, sd), found by bisection on the Gaussian
// mass of the retained covariate region.
double population_score_quantile(const CovariateScore& score, GaussianCovariate clean_x, double q);

// Inclusive ceil(n q)-th order statistic of the scores of a reference sample.
double reference_score_quantile(const CovariateScore& score, std::span<const double> reference_x, double q);

// Resolves a policy without touching calibration data. The population policy
// needs `clean_x`; the reference policy needs `reference_x`.
ResolvedThreshold resolve_threshold(const ThresholdPolicy& policy, const CovariateScore& score,
                                    std::optional<GaussianCovariate> clean_x,
                                    std::span<const double> reference_x = {});

}  // namespace trimcp
