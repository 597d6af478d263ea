#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "trimcp/conformal.hpp"
#include "trimcp/errors.hpp"
#include "trimcp/harness.hpp"
#include "trimcp/numkernel.hpp"
#include "trimcp/rng.hpp"

namespace trimcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertificateBudget = 0.05;

struct RepRecord {
  double coverage = 0.0;
  double width = 0.0;
  bool degenerate = false;
  std::size_t n_keep = 0;
  std::size_t n_dirty_kept = 0;
  double cons_lb = 0.0;
  double audit_lb = 0.0;
};

Summary summarize(const std::vector<double>& v) {
  Summary s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  if (v.size() > 1 && std::isfinite(s.mean)) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  const double half = std::isfinite(s.mean) ? 1.96 * s.sd / std::sqrt(n) : 0.0;
  s.lo = s.mean - half;
  s.hi = s.mean + half;
  return s;
}

// Runs body(i) for i in [0, n) on up to `threads` workers. Results are
// written by index, so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

Certificate diagnostic_sample_certificate(const GeneratedScene& g, double alpha, std::size_t n_diag, double beta,
                                          std::uint64_t seed) {
  if (n_diag < 1) throw std::domain_error("diagnostic_sample_certificate: n_diag must be positive");
  const ContaminationScene& scene = g.scene;
  Rng rng = make_rng(seed);
  std::vector<double> all;
  std::vector<double> kept;
  all.reserve(n_diag);
  kept.reserve(n_diag);
  for (std::size_t i = 0; i < n_diag; ++i) {
    const ScorePair p = scene.clean->draw(rng);
    all.push_back(p.a);
    if (p.s <= scene.threshold) kept.push_back(p.a);
  }
  std::int64_t dirty_kept = 0;
  for (std::size_t i = 0; i < n_diag; ++i) dirty_kept += scene.dirty->draw(rng).s <= scene.threshold ? 1 : 0;

  const auto n = static_cast<std::int64_t>(n_diag);
  const auto m_c = static_cast<std::int64_t>(kept.size());
  const double part = beta / 4.0;
  Certificate c;
  if (m_c == 0) {
    c.route = CertificateRoute::componentwise;
    c.lower_bound = 0.0;
  } else {
    const double delta_hat = empirical_one_sided_gap(kept, all);
    ComponentBounds b;
    b.L_c = clopper_pearson_lower(m_c, n, part);
    b.U_d = clopper_pearson_upper(dirty_kept, n, part);
    b.B_delta_plus = std::min(1.0, delta_hat + dkw_radius(m_c, part, Sidedness::one_sided) +
                                       dkw_radius(n, part, Sidedness::one_sided));
    b.B_Q_plus = 1.0;
    b.eps_max = scene.epsilon;
    c = componentwise_certificate(alpha, b);
    c.inputs["delta_hat"] = delta_hat;
  }
  c.beta = beta;
  c.inputs["n_diag"] = static_cast<double>(n_diag);
  c.inputs["clean_kept"] = static_cast<double>(m_c);
  c.inputs["dirty_kept"] = static_cast<double>(dirty_kept);
  return c;
}

RunResult run_experiment(const SceneSpec& spec, const RunOptions& options) {
  const GeneratedScene g = generate_scene(spec);
  const ContaminationScene& scene = g.scene;
  const std::uint64_t seed = *spec.seed;
  const LawPtr target = scene.clean->score_law();
  const auto m = static_cast<std::size_t>(spec.m);
  const std::size_t n_diag = spec.diagnostic_size == 0 ? m : spec.diagnostic_size;
  const std::uint64_t gi = options.grid_index;

  std::vector<RepRecord> recs(spec.reps);
  parallel_for(spec.reps, options.threads, [&](std::size_t rep) {
    Rng rng = make_rng(derive_seed(seed, {stream::replication, gi, rep}));
    CalibrationSample cs;
    cs.points.reserve(m);
    cs.labels.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      bool dirty = false;
      cs.points.push_back(draw_contaminated(scene, rng, dirty));
      cs.labels.push_back(dirty ? Origin::dirty : Origin::clean);
    }
    const TrimOutcome out = trim_and_calibrate(cs, scene.threshold, spec.alpha);
    RepRecord& r = recs[rep];
    if (spec.n_test == 0) {
      r.coverage = empirical_coverage(out, *target, ExactCdf{});
    } else {
      r.coverage = empirical_coverage(
          out, *target, MonteCarloCoverage{spec.n_test, derive_seed(seed, {stream::replication, gi, rep, 1})});
    }
    r.degenerate = out.degenerate;
    r.width = out.degenerate ? kInf : predict_interval(0.0, out.tau_hat).width();
    r.n_keep = out.n_keep;
    for (std::size_t idx : out.keep_indices) r.n_dirty_kept += cs.labels[idx] == Origin::dirty ? 1 : 0;
    r.cons_lb = diagnostic_sample_certificate(g, spec.alpha, n_diag, kCertificateBudget,
                                              derive_seed(seed, {stream::diagnostic, gi, rep}))
                    .lower_bound;
    if (spec.audit_size > 0) {
      if (out.n_keep == 0) {
        r.audit_lb = 0.0;
      } else {
        Rng arng = make_rng(derive_seed(seed, {stream::audit, gi, rep}));
        std::vector<double> audit(spec.audit_size);
        for (auto& a : audit) a = scene.clean->draw(arng).a;
        std::vector<double> selected;
        selected.reserve(out.n_keep);
        for (std::size_t idx : out.keep_indices) selected.push_back(cs.points[idx].a);
        r.audit_lb = ks_audit_certificate(selected, audit, out.tau_hat, kCertificateBudget).lower_bound;
      }
    }
  });

  RunResult res;
  res.spec = spec;
  res.method = spec.method_label();
  res.threshold_source = g.threshold_source;
  res.threshold = scene.threshold;
  std::size_t degenerate = 0;
  std::size_t kept = 0;
  std::size_t dirty_kept = 0;
  double cons = 0.0;
  double audit = 0.0;
  for (const RepRecord& r : recs) {
    res.coverage.push_back(r.coverage);
    res.width.push_back(r.width);
    res.degenerate.push_back(r.degenerate ? 1 : 0);
    degenerate += r.degenerate ? 1 : 0;
    kept += r.n_keep;
    dirty_kept += r.n_dirty_kept;
    cons += r.cons_lb;
    audit += r.audit_lb;
  }
  const double reps = static_cast<double>(spec.reps);
  res.coverage_summary = summarize(res.coverage);
  res.width_summary = summarize(res.width);
  res.degenerate_rate = static_cast<double>(degenerate) / reps;
  res.fallback_rate = res.degenerate_rate;
  res.mean_n_keep = static_cast<double>(kept) / reps;
  res.empirical_eps_tilde = kept == 0 ? 0.0 : static_cast<double>(dirty_kept) / static_cast<double>(kept);
  res.cons_lb = cons / reps;
  if (spec.audit_size > 0) res.audit_lb = audit / reps;

  if (options.with_report) {
    ReportOptions ro;
    ro.quad.seed = derive_seed(seed, {stream::quadrature});
    res.report = build_report(scene, spec.m, spec.alpha, ro);
  } else {
    res.report.alpha = spec.alpha;
    res.report.m = spec.m;
    res.report.epsilon = spec.epsilon;
  }
  return res;
}

SweepAxis parse_axis(const std::string& s) {
  for (auto a : {SweepAxis::dirty_offset, SweepAxis::m, SweepAxis::q, SweepAxis::epsilon}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown sweep axis '" + s + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::dirty_offset:
      return "dirty_offset";
    case SweepAxis::m:
      return "m";
    case SweepAxis::q:
      return "q";
    case SweepAxis::epsilon:
      return "epsilon";
  }
  return "unknown";
}

std::vector<RunResult> run_sweep(const SweepSpec& sweep, const RunOptions& options) {
  if (sweep.values.empty()) throw ConfigError("sweep axis has no values");
  std::vector<RunResult> out;
  out.reserve(sweep.values.size());
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    SceneSpec s = sweep.base;
    const double v = sweep.values[i];
    switch (sweep.axis) {
      case SweepAxis::dirty_offset:
        s.dirty_offset = v;
        break;
      case SweepAxis::m:
        if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("m sweep values must be positive integers");
        s.m = static_cast<std::int64_t>(v);
        break;
      case SweepAxis::q:
        if (auto* p = std::get_if<PopulationQuantile>(&s.threshold)) {
          p->q = v;
        } else if (auto* r = std::get_if<ReferenceQuantile>(&s.threshold)) {
          r->q = v;
        } else {
          throw ConfigError("q sweeps need a quantile threshold policy");
        }
        break;
      case SweepAxis::epsilon:
        s.epsilon = v;
        break;
    }
    RunOptions o = options;
    o.grid_index = i;
    out.push_back(run_experiment(s, o));
  }
  return out;
}

}  // namespace trimcp
