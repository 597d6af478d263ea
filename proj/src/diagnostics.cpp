#include "trimcp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "trimcp/conformal.hpp"
#include "trimcp/errors.hpp"
#include "trimcp/numkernel.hpp"
#include "trimcp/rng.hpp"

namespace trimcp {
namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0,1)");
}

// u -> Q_R(u). Laws without a cheap quantile are inverted through a dense
// table of (a, F_R(a)) with linear interpolation inside each cell.
class QuantileMap {
 public:
  QuantileMap(const ScoreLaw& r, std::size_t table_points) : r_(r) {
    if (r_.fast_quantile()) return;
    const double lo = r_.lower_quantile(1e-13);
    const double hi = r_.lower_quantile(1.0 - 1e-13);
    const std::size_t n = std::max<std::size_t>(table_points, 2);
    a_.resize(n);
    f_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      a_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      f_[i] = r_.cdf(a_[i]);
    }
  }

  double operator()(double u) const {
    u = std::clamp(u, std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
    if (a_.empty() || u <= f_.front() || u > f_.back()) return r_.lower_quantile(u);
    const auto j = static_cast<std::size_t>(std::lower_bound(f_.begin(), f_.end(), u) - f_.begin());
    const double t = (u - f_[j - 1]) / (f_[j] - f_[j - 1]);
    return a_[j - 1] + t * (a_[j] - a_[j - 1]);
  }

 private:
  const ScoreLaw& r_;
  std::vector<double> a_;
  std::vector<double> f_;
};

QuadratureSpec::Method resolve_method(QuadratureSpec::Method requested, LawKind kind) {
  if (requested != QuadratureSpec::Method::automatic) return requested;
  switch (kind) {
    case LawKind::finite:
      return QuadratureSpec::Method::step_sum;
    case LawKind::continuous:
      return QuadratureSpec::Method::gauss_legendre;
    case LawKind::mixed:
      return QuadratureSpec::Method::monte_carlo;
  }
  return QuadratureSpec::Method::monte_carlo;
}

// E[F_P(Q_R(B))] with B ~ Beta(r, n + 1 - r) by Gauss-Legendre in v = I_B.
double psi_gauss_legendre(std::int64_t n, std::size_t r, const QuantileMap& q, const ScoreLaw& target,
                          const QuadratureRule& rule) {
  const BetaParams bp{static_cast<double>(r), static_cast<double>(n + 1) - static_cast<double>(r)};
  double s = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double u = beta_quantile(rule.nodes[k], bp);
    s += rule.weights[k] * target.cdf(q(u));
  }
  return s;
}

struct AtomTable {
  std::vector<double> cum;       // F_R at each atom
  std::vector<double> target;    // F_P at each atom
};

// Exact expectation for finite R: Q_R(B) = a_j exactly when c_{j-1} < B <= c_j.
double psi_step_sum(std::int64_t n, std::size_t r, const AtomTable& t) {
  const BetaParams bp{static_cast<double>(r), static_cast<double>(n + 1) - static_cast<double>(r)};
  const double u_lo = beta_quantile(1e-18, bp);
  const double u_hi = beta_quantile(1.0 - 1e-15, bp);
  const std::size_t last = t.cum.size() - 1;
  const auto j_lo = std::min<std::size_t>(
      static_cast<std::size_t>(std::lower_bound(t.cum.begin(), t.cum.end(), u_lo) - t.cum.begin()), last);
  const auto j_hi = std::min<std::size_t>(
      static_cast<std::size_t>(std::lower_bound(t.cum.begin(), t.cum.end(), u_hi) - t.cum.begin()), last);
  double prev = j_lo == 0 ? 0.0 : reg_inc_beta(std::min(t.cum[j_lo - 1], 1.0), bp);
  double s = 0.0;
  for (std::size_t j = j_lo; j <= j_hi; ++j) {
    const double cur = j == last ? 1.0 : reg_inc_beta(std::min(t.cum[j], 1.0), bp);
    s += t.target[j] * (cur - prev);
    prev = cur;
  }
  return s;
}

struct GapSummary {
  GapExtrema trim;                 // P_keep vs P
  std::optional<GapExtrema> dirty; // Q_keep vs P, when available and reliable
  bool dirty_fallback = false;     // p_d > 0 but Q_keep unavailable
  GapExtrema direct;               // R vs P
};

GapSummary summarize_gaps(const RetainedProfile& pr, const GapGrid& grid) {
  if (!pr.law_p_keep || !(pr.p_c > 0.0)) {
    throw MissingComponent("clean retention is zero, so the clean trimming distortion is undefined");
  }
  GapSummary g;
  g.trim = cdf_gap_extrema(*pr.law_p_keep, *pr.law_p, grid);
  if (pr.p_d > 0.0) {
    if (pr.law_q_keep && pr.q_keep_reliable) {
      g.dirty = cdf_gap_extrema(*pr.law_q_keep, *pr.law_p, grid);
    } else {
      g.dirty_fallback = true;
    }
  }
  g.direct = cdf_gap_extrema(*pr.law_r, *pr.law_p, grid);
  return g;
}

UpperBoundRecord upper_from_gaps(const RetainedProfile& pr, std::int64_t m, double alpha, bool tie_randomized,
                                 const GapSummary& g) {
  UpperBoundRecord u;
  u.beta_m = granularity_beta_m(m, pr.mu_keep);
  u.mirror_gap = g.direct.minus;
  const double dq_minus = g.dirty ? g.dirty->minus : (g.dirty_fallback ? 1.0 : 0.0);
  const double dq_two = g.dirty ? std::max(g.dirty->plus, g.dirty->minus) : (g.dirty_fallback ? 1.0 : 0.0);
  const double mix_minus = (1.0 - pr.eps_tilde) * g.trim.minus + pr.eps_tilde * dq_minus;
  const double mix_two = (1.0 - pr.eps_tilde) * std::max(g.trim.plus, g.trim.minus) + pr.eps_tilde * dq_two;
  u.upper = std::clamp(1.0 - alpha + u.mirror_gap + u.beta_m, 0.0, 1.0);
  u.upper_mix_minus = std::clamp(1.0 - alpha + mix_minus + u.beta_m, 0.0, 1.0);
  u.upper_mix_two = std::clamp(1.0 - alpha + mix_two + u.beta_m, 0.0, 1.0);
  u.atoms_warning = pr.law_r->kind() != LawKind::continuous && !tie_randomized;
  return u;
}

double delta_mix_two(const RetainedProfile& pr, const GapSummary& g) {
  const double dq_two = g.dirty ? std::max(g.dirty->plus, g.dirty->minus) : (g.dirty_fallback ? 1.0 : 0.0);
  return (1.0 - pr.eps_tilde) * std::max(g.trim.plus, g.trim.minus) + pr.eps_tilde * dq_two;
}

}  // namespace

ExactCoverage exact_coverage_detailed(const RetainedProfile& profile, std::int64_t m, double alpha,
                                      const ScoreLaw& target, const QuadratureSpec& quad) {
  check_alpha(alpha);
  if (m < 0) throw std::domain_error("exact_coverage_identity: m must be nonnegative");
  if (!(profile.mu_keep > 0.0) || !profile.law_r) throw DegenerateRetention("exact_coverage_identity: mu_keep is zero");
  const ScoreLaw& r_law = *profile.law_r;
  const BinomialWeights bw = binomial_weights({m, profile.mu_keep}, quad.weight_cutoff);

  ExactCoverage out;
  out.method = resolve_method(quad.method, r_law.kind());

  if (out.method == QuadratureSpec::Method::monte_carlo) {
    std::vector<double> cum(bw.weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cum.size(); ++i) cum[i] = (acc += bw.weights[i]);
    Rng rng = make_rng(derive_seed(quad.seed, {stream::quadrature}));
    double sum = 0.0;
    double sum2 = 0.0;
    const std::size_t draws = std::max<std::size_t>(quad.mc_draws, 2);
    for (std::size_t k = 0; k < draws; ++k) {
      const double pick = uniform01(rng) * acc;
      const auto idx = std::min<std::size_t>(
          static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()), cum.size() - 1);
      const std::int64_t n = bw.first + static_cast<std::int64_t>(idx);
      const std::size_t r = conformal_rank(static_cast<std::size_t>(n), alpha);
      double v = 1.0;
      if (r != static_cast<std::size_t>(n) + 1) {
        std::gamma_distribution<double> ga(static_cast<double>(r), 1.0);
        std::gamma_distribution<double> gb(static_cast<double>(n + 1) - static_cast<double>(r), 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        const double b = std::clamp(x / (x + y), std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
        v = target.cdf(r_law.lower_quantile(b));
      }
      sum += v;
      sum2 += v * v;
    }
    const double nd = static_cast<double>(draws);
    out.value = std::clamp(sum / nd, 0.0, 1.0);
    out.standard_error = std::sqrt(std::max(0.0, sum2 / nd - (sum / nd) * (sum / nd)) / (nd - 1.0));
    return out;
  }

  std::optional<QuantileMap> qmap;
  AtomTable atoms;
  if (out.method == QuadratureSpec::Method::step_sum) {
    if (r_law.kind() != LawKind::finite) throw std::invalid_argument("step_sum quadrature needs a finite retained law");
    for (double a : r_law.support_points()) {
      atoms.cum.push_back(r_law.cdf(a));
      atoms.target.push_back(target.cdf(a));
    }
  } else {
    qmap.emplace(r_law, quad.table_points);
  }
  const QuadratureRule& rule = gauss_legendre_unit(quad.order);

  double total = 0.0;
  for (std::size_t i = 0; i < bw.weights.size(); ++i) {
    const std::int64_t n = bw.first + static_cast<std::int64_t>(i);
    const std::size_t r = conformal_rank(static_cast<std::size_t>(n), alpha);
    double psi = 1.0;
    if (r != static_cast<std::size_t>(n) + 1) {
      psi = out.method == QuadratureSpec::Method::step_sum ? psi_step_sum(n, r, atoms)
                                                            : psi_gauss_legendre(n, r, *qmap, target, rule);
    }
    total += bw.weights[i] * psi;
  }
  out.value = std::clamp(total, 0.0, 1.0);
  return out;
}

double exact_coverage_identity(const RetainedProfile& profile, std::int64_t m, double alpha, const ScoreLaw& target,
                               const QuadratureSpec& quad) {
  return exact_coverage_detailed(profile, m, alpha, target, quad).value;
}

double psi_n(std::int64_t n, double alpha, double d) {
  check_alpha(alpha);
  if (n < 0) throw std::domain_error("psi_n: n must be nonnegative");
  if (!(d >= 0.0 && d <= 1.0)) throw std::domain_error("psi_n: d outside [0,1]");
  const std::size_t r = conformal_rank(static_cast<std::size_t>(n), alpha);
  if (r == static_cast<std::size_t>(n) + 1) return 1.0;
  const double rr = static_cast<double>(r);
  const double b = static_cast<double>(n + 1) - rr;
  const double head = rr / static_cast<double>(n + 1) * reg_inc_beta_complement(d, {rr + 1.0, b});
  const double tail = d * reg_inc_beta_complement(d, {rr, b});
  return std::max(0.0, head - tail);
}

double L_fs(std::int64_t m, double mu, double alpha, double d) {
  check_alpha(alpha);
  if (m < 0) throw std::domain_error("L_fs: m must be nonnegative");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::domain_error("L_fs: mu outside (0,1]");
  if (!(d >= 0.0 && d <= 1.0)) throw std::domain_error("L_fs: d outside [0,1]");
  const BinomialWeights bw = binomial_weights({m, mu});
  double s = 0.0;
  for (std::size_t i = 0; i < bw.weights.size(); ++i) s += bw.weights[i] * psi_n(bw.first + static_cast<std::int64_t>(i), alpha, d);
  return std::clamp(s, 0.0, 1.0);
}

double trim_distortion_covariance(const ContaminationScene& scene, double t, const ProfileMode& mode) {
  scene.validate();
  const ScoredComponent& clean = *scene.clean;
  if (std::holds_alternative<MonteCarloProfile>(mode)) {
    const auto& mc = std::get<MonteCarloProfile>(mode);
    if (mc.samples < 2) throw std::invalid_argument("trim_distortion_covariance: need at least two draws");
    Rng rng = make_rng(derive_seed(mc.seed, {stream::profile, 7}));
    double sk = 0.0, sa = 0.0, sak = 0.0;
    for (std::size_t i = 0; i < mc.samples; ++i) {
      const ScorePair p = clean.draw(rng);
      const double k = p.s <= scene.threshold ? 1.0 : 0.0;
      const double a = p.a <= t ? 1.0 : 0.0;
      sk += k;
      sa += a;
      sak += a * k;
    }
    const double n = static_cast<double>(mc.samples);
    if (sk == 0.0) throw MissingComponent("trim_distortion_covariance: no clean draw retained");
    return (sak / n - (sa / n) * (sk / n)) / (sk / n);
  }
  const double p_c = clean.retention(scene.threshold);
  if (!(p_c > 0.0)) throw MissingComponent("trim_distortion_covariance: clean retention is zero");
  const double joint = clean.joint_cdf(t, scene.threshold);
  const double marginal = clean.score_law()->cdf(t);
  return (joint - marginal * p_c) / p_c;
}

double trim_distortion_misspec_bound(double eta, double density_bound) {
  if (!(eta >= 0.0)) throw std::domain_error("trim_distortion_misspec_bound: eta must be nonnegative");
  if (!(density_bound > 0.0)) throw std::domain_error("trim_distortion_misspec_bound: density bound must be positive");
  return 2.0 * density_bound * eta;
}

double trim_distortion_misspec_bound(double eta, const ScoreLaw& a0, const GapGrid& grid) {
  if (!(eta >= 0.0)) throw std::domain_error("trim_distortion_misspec_bound: eta must be nonnegative");
  double best = 0.0;
  const auto window = [&](double t) { best = std::max(best, a0.cdf(t + eta) - a0.cdf_left(t - eta)); };
  for (double p : a0.support_points()) {
    window(p - eta);
    window(p + eta);
  }
  const double lo = a0.lower_quantile(grid.tail) - eta;
  const double hi = a0.lower_quantile(1.0 - grid.tail) + eta;
  const std::size_t n = std::max<std::size_t>(grid.points, 3);
  for (std::size_t i = 0; i < n; ++i) window(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  return std::clamp(best, 0.0, 1.0);
}

double separation_coefficient_bound(double epsilon, double lambda) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::domain_error("separation_coefficient_bound: epsilon outside [0,1)");
  if (!(lambda >= 0.0)) throw std::domain_error("separation_coefficient_bound: lambda must be nonnegative");
  return epsilon * lambda / (1.0 - epsilon + epsilon * lambda);
}

double granularity_beta_m(std::int64_t m, double mu) {
  if (m < 0) throw std::domain_error("granularity_beta_m: m must be nonnegative");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::domain_error("granularity_beta_m: mu outside (0,1]");
  const double mp1 = static_cast<double>(m + 1);
  if (mu == 1.0) return 1.0 / mp1;
  return -std::expm1(mp1 * std::log1p(-mu)) / (mp1 * mu);
}

UpperBoundRecord coverage_upper_bound(const RetainedProfile& profile, std::int64_t m, double alpha,
                                      bool tie_randomized, const GapGrid& grid) {
  check_alpha(alpha);
  return upper_from_gaps(profile, m, alpha, tie_randomized, summarize_gaps(profile, grid));
}

std::optional<QuantileShiftBound> quantile_perturbation(const ScoreLaw& f, const ScoreLaw& g, double p,
                                                        double lambda_min, double rho, const GapGrid& grid) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile_perturbation: p outside (0,1)");
  if (!(lambda_min > 0.0) || !(rho > 0.0)) throw std::domain_error("quantile_perturbation: lambda and rho must be positive");
  const double delta = sup_cdf_gap(f, g, GapSide::two_sided, grid);
  if (!(delta < lambda_min * rho)) return std::nullopt;
  return QuantileShiftBound{delta / lambda_min, delta, std::fabs(g.lower_quantile(p) - f.lower_quantile(p))};
}

std::optional<WidthEfficiency> width_efficiency_bound(const RetainedProfile& profile, std::int64_t m, double alpha,
                                                      std::int64_t n0, double beta, double lambda_min, double rho,
                                                      const GapGrid& grid) {
  check_alpha(alpha);
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("width_efficiency_bound: beta outside (0,1)");
  if (!(lambda_min > 0.0) || !(rho > 0.0)) throw std::domain_error("width_efficiency_bound: lambda and rho must be positive");
  const auto min_n0 = static_cast<std::int64_t>(std::ceil(1.0 / alpha - 1e-12)) - 1;
  if (n0 < std::max<std::int64_t>(min_n0, 1)) throw std::domain_error("width_efficiency_bound: n0 below ceil(1/alpha) - 1");
  const GapSummary g = summarize_gaps(profile, grid);
  const double nd = static_cast<double>(n0);
  const double gamma = delta_mix_two(profile, g) + std::sqrt(std::log(2.0 / beta) / (2.0 * nd)) + 2.0 / nd;
  if (!(gamma < lambda_min * rho)) return std::nullopt;
  WidthEfficiency w;
  w.gamma = gamma;
  w.threshold_deviation = gamma / lambda_min;
  w.clean_quantile = profile.law_p->lower_quantile(1.0 - alpha);
  w.width_bound = 2.0 * w.clean_quantile + 2.0 * w.threshold_deviation;
  const double below = n0 <= 0 ? 0.0 : (n0 - 1 >= m ? 1.0 : binom_pmf_cdf(n0 - 1, {m, profile.mu_keep}).cdf);
  w.failure_probability = std::min(1.0, below + beta);
  return w;
}

DiagnosticReport build_report(const RetainedProfile& profile, std::int64_t m, double alpha, const ReportOptions& options) {
  check_alpha(alpha);
  if (m < 0) throw std::domain_error("build_report: m must be nonnegative");
  DiagnosticReport rep;
  rep.alpha = alpha;
  rep.m = m;
  rep.epsilon = profile.epsilon;
  rep.p_c = profile.p_c;
  rep.p_d = profile.p_d;
  rep.mu_keep = profile.mu_keep;
  rep.eps_tilde = profile.eps_tilde;
  rep.provenance = profile.provenance.analytic ? "population_analytic" : "population_montecarlo";

  const GapSummary g = summarize_gaps(profile, options.grid);
  rep.delta_trim_plus = g.trim.plus;
  rep.delta_trim_minus = g.trim.minus;
  rep.delta_trim_two = std::max(g.trim.plus, g.trim.minus);
  rep.d_direct_plus = g.direct.plus;
  rep.d_mirror_plus = g.direct.minus;
  double dq_plus = 0.0;
  if (g.dirty) {
    rep.D_Q_plus = g.dirty->plus;
    rep.D_Q_minus = g.dirty->minus;
    dq_plus = g.dirty->plus;
  } else if (g.dirty_fallback) {
    rep.l_mix_uses_fallback = true;
    dq_plus = 1.0;
  }
  rep.dirty_contribution = profile.eps_tilde * dq_plus;
  rep.delta_mix_plus = (1.0 - profile.eps_tilde) * rep.delta_trim_plus + rep.dirty_contribution;
  rep.L_mix_plus = std::max(0.0, 1.0 - alpha - rep.delta_mix_plus);
  rep.L_fs_at_direct = L_fs(m, profile.mu_keep, alpha, std::min(1.0, rep.d_direct_plus));
  rep.L_fs_at_mixture = L_fs(m, profile.mu_keep, alpha, std::min(1.0, rep.delta_mix_plus));
  rep.beta_m = granularity_beta_m(m, profile.mu_keep);
  const UpperBoundRecord up = upper_from_gaps(profile, m, alpha, options.tie_randomized, g);
  rep.coverage_upper = up.upper;
  rep.upper_atoms_warning = up.atoms_warning;
  if (options.exact_coverage) {
    rep.exact_coverage = exact_coverage_identity(profile, m, alpha, *profile.law_p, options.quad);
  }
  return rep;
}

DiagnosticReport build_report(const ContaminationScene& scene, std::int64_t m, double alpha, const ReportOptions& options) {
  return build_report(derive_retained_profile(scene, options.profile), m, alpha, options);
}

}  // namespace trimcp
