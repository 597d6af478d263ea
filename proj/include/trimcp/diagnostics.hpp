#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "trimcp/population.hpp"
#include "trimcp/scorelaw.hpp"

namespace trimcp {

// How the Beta expectation inside each binomial term is evaluated.
//  - gauss_legendre: quadrature on the Beta-CDF scale, for continuous R;
//  - step_sum: exact sum over the atoms of a finite R;
//  - monte_carlo: sampled (N, B) pairs, with a standard error;
//  - automatic: step_sum for finite R, gauss_legendre for continuous R,
//    monte_carlo for R with both atoms and a continuous part.
struct QuadratureSpec {
  enum class Method { automatic, gauss_legendre, step_sum, monte_carlo };
  Method method = Method::automatic;
  int order = 256;
  std::size_t table_points = 16385;
  std::size_t mc_draws = 1000000;
  std::uint64_t seed = 0;
  double weight_cutoff = 1e-15;
};

struct ExactCoverage {
  double value = 0.0;
  double standard_error = 0.0;  // zero for deterministic methods
  QuadratureSpec::Method method = QuadratureSpec::Method::automatic;
};

ExactCoverage exact_coverage_detailed(const RetainedProfile& profile, std::int64_t m, double alpha,
                                      const ScoreLaw& target, const QuadratureSpec& quad = {});
double exact_coverage_identity(const RetainedProfile& profile, std::int64_t m, double alpha, const ScoreLaw& target,
                               const QuadratureSpec& quad = {});

// E[(B - d)_+]-type closed form for the extremal pair at retained size n.
double psi_n(std::int64_t n, double alpha, double d);

// Binomial mixture of psi_n(d) over N ~ Binomial(m, mu).
double L_fs(std::int64_t m, double mu, double alpha, double d);

// Cov_P(1{A <= t}, K) / p_c with K = 1{S <= t*}.
double trim_distortion_covariance(const ContaminationScene& scene, double t, const ProfileMode& mode = AnalyticProfile{});

// 2 * M * eta for a density bound M.
double trim_distortion_misspec_bound(double eta, double density_bound);
// sup_t P(A0 in [t - eta, t + eta]) for an explicit law of A0.
double trim_distortion_misspec_bound(double eta, const ScoreLaw& a0, const GapGrid& grid = {});

double separation_coefficient_bound(double epsilon, double lambda);

// E[1/(N + 1)] for N ~ Binomial(m, mu).
double granularity_beta_m(std::int64_t m, double mu);

struct UpperBoundRecord {
  double upper = 1.0;            // 1 - alpha + d_{P->R,+} + beta_m
  double upper_mix_minus = 1.0;  // with the mixture bound delta_mix,-
  double upper_mix_two = 1.0;    // with the two-sided delta_mix(D_Q)
  double mirror_gap = 0.0;
  double beta_m = 0.0;
  // The bound assumes R has no atoms or that ties are randomised.
  bool atoms_warning = false;
};

UpperBoundRecord coverage_upper_bound(const RetainedProfile& profile, std::int64_t m, double alpha,
                                      bool tie_randomized = false, const GapGrid& grid = {});

struct QuantileShiftBound {
  double bound;           // Delta / lambda_min
  double kolmogorov;      // Delta = sup |F - G|
  double measured_shift;  // |q_G(p) - q_F(p)|
};

// Empty when the local-density condition Delta < lambda_min * rho fails.
std::optional<QuantileShiftBound> quantile_perturbation(const ScoreLaw& f, const ScoreLaw& g, double p,
                                                        double lambda_min, double rho, const GapGrid& grid = {});

struct WidthEfficiency {
  double gamma;
  double threshold_deviation;
  double width_bound;
  double failure_probability;
  double clean_quantile;
};

std::optional<WidthEfficiency> width_efficiency_bound(const RetainedProfile& profile, std::int64_t m, double alpha,
                                                      std::int64_t n0, double beta, double lambda_min, double rho,
                                                      const GapGrid& grid = {});

struct DiagnosticReport {
  double alpha = 0.1;
  std::int64_t m = 0;
  double epsilon = 0.0;
  double p_c = 1.0;
  double p_d = 1.0;
  double mu_keep = 1.0;
  double eps_tilde = 0.0;
  double delta_trim_plus = 0.0;
  double delta_trim_minus = 0.0;
  double delta_trim_two = 0.0;
  double d_direct_plus = 0.0;
  double d_mirror_plus = 0.0;
  std::optional<double> D_Q_plus;
  std::optional<double> D_Q_minus;
  // eps_tilde * D_Q,+ using the fallback D_Q,+ = 1 when D_Q is unavailable.
  double dirty_contribution = 0.0;
  double delta_mix_plus = 0.0;
  bool l_mix_uses_fallback = false;
  std::optional<double> exact_coverage;
  double L_fs_at_direct = 0.0;
  double L_fs_at_mixture = 0.0;
  double L_mix_plus = 0.0;
  double beta_m = 0.0;
  double coverage_upper = 1.0;
  bool upper_atoms_warning = false;
  // "population_analytic" or "population_montecarlo".
  std::string provenance;
};

struct ReportOptions {
  ProfileMode profile = AnalyticProfile{};
  QuadratureSpec quad;
  GapGrid grid;
  bool exact_coverage = true;
  bool tie_randomized = false;
};

DiagnosticReport build_report(const RetainedProfile& profile, std::int64_t m, double alpha,
                              const ReportOptions& options = {});
DiagnosticReport build_report(const ContaminationScene& scene, std::int64_t m, double alpha,
                              const ReportOptions& options = {});

}  // namespace trimcp
