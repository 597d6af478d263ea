#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace trimcp {

enum class LawKind { continuous, finite, mixed };

// A one-dimensional score distribution. Implementations are immutable after
// construction, so a single instance can be shared between threads.
class ScoreLaw {
 public:
  virtual ~ScoreLaw() = default;

  // Right-continuous CDF P(A <= a).
  virtual double cdf(double a) const = 0;
  // Left limit P(A < a). Differs from cdf only at atoms.
  virtual double cdf_left(double a) const { return cdf(a); }
  // inf{a : cdf(a) >= u} for u in (0,1). The default inverts cdf numerically.
  virtual double lower_quantile(double u) const;
  // n independent draws. The default uses inverse-transform sampling.
  virtual std::vector<double> sample(std::uint64_t seed, std::size_t n) const;

  virtual LawKind kind() const = 0;
  // Atoms and knots of the CDF. For laws with exact_support() the CDF is
  // linear between consecutive support points, so gaps between two such laws
  // are extremal at these points or their left limits.
  virtual std::vector<double> support_points() const { return {}; }
  virtual bool exact_support() const { return false; }
  // True when lower_quantile is closed-form or a table lookup.
  virtual bool fast_quantile() const { return false; }
  virtual std::string name() const = 0;

  // A finite interval holding most of the mass; used to seed numeric searches.
  virtual std::pair<double, double> bracket() const = 0;
};

using LawPtr = std::shared_ptr<const ScoreLaw>;

class GaussianLaw final : public ScoreLaw {
 public:
  GaussianLaw(double mean, double sd);
  double cdf(double a) const override;
  double lower_quantile(double u) const override;
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override { return LawKind::continuous; }
  bool fast_quantile() const override { return true; }
  std::string name() const override { return "gaussian"; }
  std::pair<double, double> bracket() const override;

 private:
  double mean_;
  double sd_;
};

// Law of sigma * |xi| for standard normal xi.
class HalfNormalLaw final : public ScoreLaw {
 public:
  explicit HalfNormalLaw(double sigma);
  double cdf(double a) const override;
  double lower_quantile(double u) const override;
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override { return LawKind::continuous; }
  bool fast_quantile() const override { return true; }
  std::string name() const override { return "half_normal"; }
  std::pair<double, double> bracket() const override { return {0.0, 8.0 * sigma_}; }
  double sigma() const { return sigma_; }

 private:
  double sigma_;
};

// Step CDF of a sample.
class EmpiricalLaw final : public ScoreLaw {
 public:
  explicit EmpiricalLaw(std::vector<double> values);
  double cdf(double a) const override;
  double cdf_left(double a) const override;
  double lower_quantile(double u) const override;
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override { return LawKind::finite; }
  std::vector<double> support_points() const override;
  bool exact_support() const override { return true; }
  bool fast_quantile() const override { return true; }
  std::string name() const override { return "empirical"; }
  std::pair<double, double> bracket() const override { return {sorted_.front(), sorted_.back()}; }
  const std::vector<double>& sorted_values() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

// Continuous CDF interpolating linearly between knots; values run from 0 to 1.
class PiecewiseLinearCdfLaw final : public ScoreLaw {
 public:
  PiecewiseLinearCdfLaw(std::vector<double> knots, std::vector<double> values);
  double cdf(double a) const override;
  double lower_quantile(double u) const override;
  LawKind kind() const override { return LawKind::continuous; }
  std::vector<double> support_points() const override { return knots_; }
  bool exact_support() const override { return true; }
  bool fast_quantile() const override { return true; }
  std::string name() const override { return "piecewise_linear"; }
  std::pair<double, double> bracket() const override { return {knots_.front(), knots_.back()}; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

class FiniteDiscreteLaw final : public ScoreLaw {
 public:
  // Duplicate atoms are merged; masses must be nonnegative and sum to one.
  FiniteDiscreteLaw(std::vector<double> atoms, std::vector<double> masses);
  double cdf(double a) const override;
  double cdf_left(double a) const override;
  double lower_quantile(double u) const override;
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override { return LawKind::finite; }
  std::vector<double> support_points() const override { return atoms_; }
  bool exact_support() const override { return true; }
  bool fast_quantile() const override { return true; }
  std::string name() const override { return "finite_discrete"; }
  std::pair<double, double> bracket() const override { return {atoms_.front(), atoms_.back()}; }
  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& masses() const { return masses_; }

 private:
  std::vector<double> atoms_;
  std::vector<double> masses_;
  std::vector<double> cumulative_;
};

class MixtureLaw final : public ScoreLaw {
 public:
  MixtureLaw(std::vector<double> weights, std::vector<LawPtr> components);
  double cdf(double a) const override;
  double cdf_left(double a) const override;
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override;
  std::vector<double> support_points() const override;
  bool exact_support() const override;
  std::string name() const override { return "mixture"; }
  std::pair<double, double> bracket() const override;

 private:
  std::vector<double> weights_;
  std::vector<LawPtr> components_;
};

// Base law restricted to the event lo <= A <= hi.
class ConditionedLaw final : public ScoreLaw {
 public:
  static constexpr std::size_t kMaxAttempts = 10'000'000;

  ConditionedLaw(LawPtr base, double lo, double hi);
  double cdf(double a) const override;
  double cdf_left(double a) const override;
  // Rejection sampling from the base law; throws SamplingBudgetExceeded after
  // kMaxAttempts proposals for one batch.
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override { return base_->kind(); }
  std::vector<double> support_points() const override;
  bool exact_support() const override { return base_->exact_support(); }
  std::string name() const override { return "conditioned"; }
  std::pair<double, double> bracket() const override;
  double acceptance_probability() const { return accept_; }

 private:
  LawPtr base_;
  double lo_;
  double hi_;
  double accept_;
  double below_;
};

// Closed covariate interval, endpoints may be infinite.
struct CovariateInterval {
  double lo;
  double hi;
};

struct GaussianCovariate {
  double mean = 0.0;
  double sd = 1.0;
};

// Residual R = offset + slope * x + (noise_base + noise_slope * |x|) * xi.
struct ResidualModel {
  double offset = 0.0;
  double slope = 0.0;
  double noise_base = 1.0;
  double noise_slope = 0.0;
};

// Law of A = |R| when X ~ N(mean, sd) is restricted to a union of intervals.
// The CDF integrates the folded-normal conditional CDF over x with composite
// Gauss-Legendre panels split at the kink x = 0.
class RegressionResidualLaw final : public ScoreLaw {
 public:
  RegressionResidualLaw(GaussianCovariate x, ResidualModel residual, std::vector<CovariateInterval> region);
  double cdf(double a) const override;
  double pdf(double a) const;
  double lower_quantile(double u) const override;
  std::vector<double> sample(std::uint64_t seed, std::size_t n) const override;
  LawKind kind() const override { return LawKind::continuous; }
  std::string name() const override { return "regression_residual"; }
  std::pair<double, double> bracket() const override;
  // P(X in region) under the unrestricted covariate law.
  double region_mass() const { return mass_; }

 private:
  GaussianCovariate x_;
  ResidualModel residual_;
  std::vector<CovariateInterval> region_;
  std::vector<double> piece_mass_;
  double mass_ = 0.0;
  std::vector<double> node_weight_;
  std::vector<double> node_center_;
  std::vector<double> node_scale_;
};

double gaussian_interval_mass(GaussianCovariate x, CovariateInterval iv);

enum class GapSide { plus, minus, two_sided };

struct GapGrid {
  enum class Mode { automatic, exact_support, dense };
  Mode mode = Mode::automatic;
  std::size_t points = 20001;
  double tail = 5e-5;
  bool refine = true;
};

struct GapExtrema {
  double plus = 0.0;   // sup (F_M - F_N)_+
  double minus = 0.0;  // sup (F_N - F_M)_+
  double argmax_plus = 0.0;
  double argmax_minus = 0.0;
};

GapExtrema cdf_gap_extrema(const ScoreLaw& m, const ScoreLaw& n, const GapGrid& grid = {});
double sup_cdf_gap(const ScoreLaw& m, const ScoreLaw& n, GapSide side, const GapGrid& grid = {});

// Extremal pair (R_d, P_d): R_d uniform on [0,1], P_d with CDF
// 0 on [0,d], t - d on [d,1], rising linearly from 1 - d to 1 on [1,2].
std::pair<LawPtr, LawPtr> make_sharpness_pair(double d);

}  // namespace trimcp
