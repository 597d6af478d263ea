#include "trimcp/certify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "trimcp/numkernel.hpp"

namespace trimcp {
namespace {

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(what) + " must lie in [0,1]");
}

void check_budget(double beta, const char* who) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error(std::string(who) + ": beta must lie in (0,1)");
}

}  // namespace

void ComponentBounds::validate() const {
  if (!(L_c > 0.0 && L_c <= 1.0)) throw std::domain_error("ComponentBounds: L_c must lie in (0,1]");
  check_unit(U_d, "ComponentBounds: U_d");
  check_unit(B_delta_plus, "ComponentBounds: B_delta_plus");
  check_unit(B_Q_plus, "ComponentBounds: B_Q_plus");
  if (!(eps_max >= 0.0 && eps_max < 1.0)) throw std::domain_error("ComponentBounds: eps_max must lie in [0,1)");
}

std::string to_string(CertificateRoute route) {
  switch (route) {
    case CertificateRoute::componentwise:
      return "componentwise";
    case CertificateRoute::binomial_audit:
      return "binomial_audit";
    case CertificateRoute::ks_audit:
      return "ks_audit";
    case CertificateRoute::same_sample_grid:
      return "same_sample_grid";
    case CertificateRoute::marginalized:
      return "marginalized";
  }
  return "unknown";
}

Certificate componentwise_certificate(double alpha, const ComponentBounds& b) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("componentwise_certificate: alpha outside (0,1)");
  b.validate();
  const double num = b.eps_max * b.U_d;
  const double eps_bar = num == 0.0 ? 0.0 : num / ((1.0 - b.eps_max) * b.L_c + num);
  Certificate c;
  c.route = CertificateRoute::componentwise;
  c.beta = 0.0;
  c.lower_bound =
      std::min(1.0, positive_part(1.0 - alpha - b.B_delta_plus - eps_bar * positive_part(b.B_Q_plus - b.B_delta_plus)));
  c.inputs = {{"alpha", alpha},
              {"L_c", b.L_c},
              {"U_d", b.U_d},
              {"B_delta_plus", b.B_delta_plus},
              {"B_Q_plus", b.B_Q_plus},
              {"eps_max", b.eps_max},
              {"eps_bar", eps_bar},
              {"simple_lower_bound", std::min(1.0, positive_part(1.0 - alpha - b.B_delta_plus - eps_bar * b.B_Q_plus))}};
  return c;
}

Certificate binomial_audit_certificate(std::int64_t covered, std::int64_t n_audit, double beta) {
  Certificate c;
  c.route = CertificateRoute::binomial_audit;
  c.beta = beta;
  c.lower_bound = clopper_pearson_lower(covered, n_audit, beta);
  c.inputs = {{"covered", static_cast<double>(covered)}, {"n_audit", static_cast<double>(n_audit)}, {"beta", beta}};
  return c;
}

double empirical_one_sided_gap(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw std::domain_error("empirical_one_sided_gap: both samples must be nonempty");
  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> ys(y.begin(), y.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  // Both step functions are right-continuous, so the positive part of
  // F_x - F_y peaks at a point of x.
  double gap = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i + 1 < xs.size() && xs[i + 1] == xs[i]) continue;
    while (j < ys.size() && ys[j] <= xs[i]) ++j;
    gap = std::max(gap, static_cast<double>(i + 1) / nx - static_cast<double>(j) / ny);
  }
  return gap;
}

Certificate ks_audit_certificate(std::span<const double> selected, std::span<const double> audit, double tau_hat,
                                 double beta) {
  if (selected.empty() || audit.empty()) throw std::domain_error("ks_audit_certificate: both samples must be nonempty");
  check_budget(beta, "ks_audit_certificate");
  const double gap = empirical_one_sided_gap(selected, audit);
  const auto below = std::count_if(selected.begin(), selected.end(), [&](double v) { return v <= tau_hat; });
  const double ns = static_cast<double>(selected.size());
  const double f_sel = static_cast<double>(below) / ns;
  const double radius = dkw_radius(static_cast<std::int64_t>(audit.size()), beta, Sidedness::one_sided);

  Certificate c;
  c.route = CertificateRoute::ks_audit;
  c.beta = beta;
  c.lower_bound = std::clamp(f_sel - gap - radius, 0.0, 1.0);
  c.inputs = {{"selected_cdf_at_tau", f_sel},
              {"one_sided_gap", gap},
              {"dkw_radius", radius},
              {"n_selected", ns},
              {"n_audit", static_cast<double>(audit.size())},
              {"tau_hat", tau_hat},
              {"beta", beta}};
  return c;
}

std::vector<GridEntry> same_sample_grid_bound(const CalibrationSample& sample, std::span<const double> grid,
                                              double alpha, double beta, std::span<const double> d_bounds) {
  if (grid.empty()) throw std::domain_error("same_sample_grid_bound: empty threshold grid");
  if (!d_bounds.empty() && d_bounds.size() != grid.size()) {
    throw std::invalid_argument("same_sample_grid_bound: d_bounds must match the grid length");
  }
  check_budget(beta, "same_sample_grid_bound");
  const auto k = static_cast<std::int64_t>(grid.size());
  std::vector<GridEntry> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw std::domain_error("same_sample_grid_bound: thresholds must be finite");
    const double d = d_bounds.empty() ? 1.0 : d_bounds[i];
    check_unit(d, "same_sample_grid_bound: d bound");
    const TrimOutcome t = trim_and_calibrate(sample, grid[i], alpha);
    GridEntry e;
    e.threshold = grid[i];
    e.n_keep = t.n_keep;
    e.rank = t.r_keep;
    e.tau_hat = t.tau_hat;
    e.degenerate = t.degenerate;
    e.certificate.route = CertificateRoute::same_sample_grid;
    e.certificate.beta = beta;
    e.certificate.inputs = {{"threshold", grid[i]},
                            {"n_keep", static_cast<double>(t.n_keep)},
                            {"grid_size", static_cast<double>(k)},
                            {"d_bound", d},
                            {"beta", beta}};
    if (t.degenerate) {
      e.certificate.lower_bound = 1.0;
      e.certificate.inputs["degenerate"] = 1.0;
    } else {
      const double n = static_cast<double>(t.n_keep);
      const double r = static_cast<double>(*t.r_keep);
      const double radius = dkw_radius(static_cast<std::int64_t>(t.n_keep), beta, Sidedness::two_sided, k);
      e.certificate.lower_bound = std::clamp(r / n - d - radius, 0.0, 1.0);
      e.certificate.inputs["rank"] = r;
      e.certificate.inputs["dkw_radius"] = radius;
      e.certificate.inputs["degenerate"] = 0.0;
    }
    out.push_back(std::move(e));
  }
  return out;
}

CountBounds retained_count_bounds(std::int64_t m, double epsilon, double p_c, double p_d, double eta_d,
                                  double eta_k) {
  if (m < 1) throw std::domain_error("retained_count_bounds: m must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::domain_error("retained_count_bounds: epsilon outside [0,1)");
  check_unit(p_c, "retained_count_bounds: p_c");
  check_unit(p_d, "retained_count_bounds: p_d");
  if (!(eta_d > 0.0) || !(eta_k > 0.0)) throw std::domain_error("retained_count_bounds: eta values must be positive");
  CountBounds b;
  b.pi_c = (1.0 - epsilon) * p_c;
  b.pi_d = epsilon * p_d;
  b.mu_keep = b.pi_c + b.pi_d;
  if (!(eta_k < b.mu_keep)) throw std::domain_error("retained_count_bounds: eta_k must be below mu_keep");
  const double md = static_cast<double>(m);
  b.clean_lower = md * (b.pi_c - eta_k);
  b.dirty_upper = md * (b.pi_d + eta_d);
  b.keep_lower = md * (b.mu_keep - eta_k);
  const double tail_k = hoeffding_tail(m, eta_k);
  const double tail_d = hoeffding_tail(m, eta_d);
  b.simultaneous_failure = std::min(1.0, 2.0 * tail_k + tail_d);
  b.ratio_bound = (b.pi_d + eta_d) / (b.mu_keep - eta_k);
  b.ratio_failure = std::min(1.0, tail_d + tail_k);
  return b;
}

TuningSelection oracle_grid_tuning(std::span<const double> grid, std::span<const double> B_hat,
                                   std::span<const double> W_hat, const TuningSpec& spec) {
  if (B_hat.size() != grid.size() || W_hat.size() != grid.size()) {
    throw std::invalid_argument("oracle_grid_tuning: estimates must be indexed by the grid");
  }
  TuningSelection s;
  s.guaranteed_loss = spec.eta + spec.r_B;
  s.efficiency_excess = 2.0 * spec.r_W;
  s.event_failure = std::min(1.0, spec.beta + spec.beta_empty);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(B_hat[i] <= spec.eta)) continue;
    ++s.feasible_count;
    if (!s.index || W_hat[i] < W_hat[*s.index] || (W_hat[i] == W_hat[*s.index] && grid[i] < grid[*s.index])) {
      s.index = i;
    }
  }
  if (s.index) {
    s.threshold = grid[*s.index];
  } else {
    s.used_fallback = true;
    s.threshold = spec.fallback;
  }
  return s;
}

std::optional<double> oracle_width(std::span<const double> B, std::span<const double> W, double level) {
  if (B.size() != W.size()) throw std::invalid_argument("oracle_width: B and W must have equal length");
  std::optional<double> best;
  for (std::size_t i = 0; i < B.size(); ++i) {
    if (B[i] <= level && (!best || W[i] < *best)) best = W[i];
  }
  return best;
}

Marginalized marginalize(double conditional_bound, double beta) {
  check_unit(beta, "marginalize: beta");
  if (!std::isfinite(conditional_bound) || conditional_bound > 1.0) {
    throw std::domain_error("marginalize: conditional bound must be at most one");
  }
  return {(1.0 - beta) * positive_part(conditional_bound), conditional_bound - beta};
}

MixtureTestBounds mixture_test_bounds(const RetainedProfile& profile, std::int64_t m, double alpha,
                                      const GapGrid& grid, const QuadratureSpec& quad) {
  if (!(profile.mu_keep > 0.0)) throw std::domain_error("mixture_test_bounds: mu_keep must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("mixture_test_bounds: alpha outside (0,1)");
  const double eps = profile.epsilon;
  LawPtr target = profile.law_p;
  if (eps > 0.0) {
    target = std::make_shared<MixtureLaw>(std::vector<double>{1.0 - eps, eps},
                                          std::vector<LawPtr>{profile.law_p, profile.law_q});
  }
  MixtureTestBounds out;
  out.direct = positive_part(1.0 - alpha - sup_cdf_gap(*profile.law_r, *target, GapSide::plus, grid));

  const double trim = sup_cdf_gap(*profile.law_p_keep, *profile.law_p, GapSide::plus, grid);
  double dq = 0.0;
  if (profile.p_d > 0.0) {
    dq = (profile.law_q_keep && profile.q_keep_reliable)
             ? sup_cdf_gap(*profile.law_q_keep, *profile.law_p, GapSide::plus, grid)
             : 1.0;
  }
  const double et = profile.eps_tilde;
  out.clean_component = (1.0 - eps) * positive_part(1.0 - alpha - ((1.0 - et) * trim + et * dq));
  out.worst_case = (1.0 - eps) * positive_part(1.0 - alpha - ((1.0 - et) * trim + et));
  const ExactCoverage ex = exact_coverage_detailed(profile, m, alpha, *target, quad);
  out.exact = ex.value;
  out.exact_standard_error = ex.standard_error;
  return out;
}

}  // namespace trimcp
