#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trimcp/conformal.hpp"
#include "trimcp/diagnostics.hpp"
#include "trimcp/population.hpp"

namespace trimcp {

// Externally certified bounds on the retained-law components:
// L_c <= p_c, p_d <= U_d, Delta_trim,+ <= B_delta_plus, D_Q,+ <= B_Q_plus and
// epsilon <= eps_max.
struct ComponentBounds {
  double L_c = 1.0;
  double U_d = 1.0;
  double B_delta_plus = 0.0;
  double B_Q_plus = 1.0;
  double eps_max = 0.0;

  void validate() const;
};

enum class CertificateRoute { componentwise, binomial_audit, ks_audit, same_sample_grid, marginalized };

std::string to_string(CertificateRoute route);

struct Certificate {
  double lower_bound = 0.0;
  // Failure probability of the bound; zero for deterministic routes.
  double beta = 0.0;
  CertificateRoute route = CertificateRoute::componentwise;
  // Every quantity that entered the bound, by name.
  std::map<std::string, double> inputs;
};

// inputs carry "eps_bar" and "simple_lower_bound" next to the bound inputs.
Certificate componentwise_certificate(double alpha, const ComponentBounds& b);

Certificate binomial_audit_certificate(std::int64_t covered, std::int64_t n_audit, double beta);

// sup_a {F_x(a) - F_y(a)}_+ for the empirical CDFs of two samples.
double empirical_one_sided_gap(std::span<const double> x, std::span<const double> y);

// Lower bound on F_P(tau_hat) from the selected scores and an independent
// clean audit sample.
Certificate ks_audit_certificate(std::span<const double> selected, std::span<const double> audit, double tau_hat,
                                 double beta);

struct GridEntry {
  double threshold = 0.0;
  std::size_t n_keep = 0;
  std::optional<std::size_t> rank;
  double tau_hat = 0.0;
  // N_t = 0 or r_t > N_t: the cutoff is +infinity and coverage is one.
  bool degenerate = false;
  Certificate certificate;
};

// Simultaneous lower bounds for every grid threshold, valid at level 1 - beta
// whichever threshold a data-dependent rule selects. d_bounds[k] bounds the
// population loss d_{R_t -> P,+} at grid[k]; missing entries use 1.
std::vector<GridEntry> same_sample_grid_bound(const CalibrationSample& sample, std::span<const double> grid,
                                              double alpha, double beta,
                                              std::span<const double> d_bounds = {});

struct CountBounds {
  double pi_c = 0.0;
  double pi_d = 0.0;
  double mu_keep = 0.0;
  double clean_lower = 0.0;  // N_clean >= m (pi_c - eta_k)
  double dirty_upper = 0.0;  // N_dirty <= m (pi_d + eta_d)
  double keep_lower = 0.0;   // N_keep >= m (mu_keep - eta_k)
  double simultaneous_failure = 0.0;
  double ratio_bound = 0.0;  // N_dirty / N_keep <= (pi_d + eta_d) / (mu_keep - eta_k)
  double ratio_failure = 0.0;
};

CountBounds retained_count_bounds(std::int64_t m, double epsilon, double p_c, double p_d, double eta_d,
                                  double eta_k);

struct TuningSelection {
  double threshold = 0.0;
  std::optional<std::size_t> index;  // empty when the fallback was used
  bool used_fallback = false;
  std::size_t feasible_count = 0;
  double guaranteed_loss = 0.0;     // eta + r_B
  double efficiency_excess = 0.0;   // 2 r_W
  // Probability of the tuning event failing (beta + beta_empty), as supplied.
  double event_failure = 0.0;
};

struct TuningSpec {
  double r_B = 0.0;
  double r_W = 0.0;
  double eta = 0.0;
  double fallback = 0.0;
  double beta = 0.0;
  double beta_empty = 0.0;
};

TuningSelection oracle_grid_tuning(std::span<const double> grid, std::span<const double> B_hat,
                                   std::span<const double> W_hat, const TuningSpec& spec);

// Smallest width over {t : B(t) <= level}; empty when no point qualifies.
std::optional<double> oracle_width(std::span<const double> B, std::span<const double> W, double level);

struct Marginalized {
  double product = 0.0;   // (1 - beta) [b]_+
  double additive = 0.0;  // b - beta
};

Marginalized marginalize(double conditional_bound, double beta);

struct MixtureTestBounds {
  double direct = 0.0;           // [1 - alpha - d_{R -> P*,+}]_+
  double clean_component = 0.0;  // (1 - eps) [1 - alpha - delta_mix(D_Q)]_+
  double worst_case = 0.0;       // as above with D_Q = 1
  double exact = 0.0;            // exact coverage of a P* test point
  double exact_standard_error = 0.0;
};

MixtureTestBounds mixture_test_bounds(const RetainedProfile& profile, std::int64_t m, double alpha,
                                      const GapGrid& grid = {}, const QuadratureSpec& quad = {});

}  // namespace trimcp
