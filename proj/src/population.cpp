#include "trimcp/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trimcp/errors.hpp"
#include "trimcp/numkernel.hpp"

namespace trimcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool covers_line(const std::vector<CovariateInterval>& region) {
  return region.size() == 1 && region.front().lo == -kInf && region.front().hi == kInf;
}

}  // namespace

std::vector<CovariateInterval> ConstantCovariateScore::retained_region(double t) const {
  if (t >= 0.0) return {{-kInf, kInf}};
  return {};
}

// ------------------------------------------------------- RegressionComponent

RegressionComponent::RegressionComponent(std::string label, GaussianCovariate x, ResponseModel y, LinearBackbone f,
                                         std::shared_ptr<const CovariateScore> score)
    : label_(std::move(label)), x_(x), y_(y), f_(f), score_(std::move(score)) {
  if (!score_) score_ = std::make_shared<ConstantCovariateScore>();
  full_ = std::make_shared<RegressionResidualLaw>(x_, residual(), std::vector<CovariateInterval>{{-kInf, kInf}});
}

ResidualModel RegressionComponent::residual() const {
  return {y_.intercept - f_.intercept, y_.slope - f_.slope, y_.noise_base, y_.noise_slope};
}

std::pair<double, double> RegressionComponent::draw_xy(Rng& rng) const {
  const double z = standard_normal(rng);
  const double xi = standard_normal(rng);
  const double x = x_.mean + x_.sd * z;
  const double y = y_.intercept + y_.slope * x + (y_.noise_base + y_.noise_slope * std::fabs(x)) * xi;
  return {x, y};
}

ScorePair RegressionComponent::draw(Rng& rng) const {
  const auto [x, y] = draw_xy(rng);
  return {std::fabs(y - (f_.intercept + f_.slope * x)), (*score_)(x)};
}

double RegressionComponent::retention(double t) const {
  double m = 0.0;
  for (const auto& iv : score_->retained_region(t)) m += gaussian_interval_mass(x_, iv);
  return std::clamp(m, 0.0, 1.0);
}

std::vector<CovariateInterval> RegressionComponent::complement(const std::vector<CovariateInterval>& region) const {
  std::vector<CovariateInterval> sorted = region;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
  std::vector<CovariateInterval> out;
  double cursor = -kInf;
  for (const auto& iv : sorted) {
    if (iv.lo > cursor) out.push_back({cursor, iv.lo});
    cursor = std::max(cursor, iv.hi);
  }
  if (cursor < kInf) out.push_back({cursor, kInf});
  return out;
}

LawPtr RegressionComponent::kept_law(double t) const {
  const auto region = score_->retained_region(t);
  if (covers_line(region)) return full_;
  if (!(retention(t) > 0.0)) return nullptr;
  return std::make_shared<RegressionResidualLaw>(x_, residual(), region);
}

LawPtr RegressionComponent::dropped_law(double t) const {
  const auto region = complement(score_->retained_region(t));
  double m = 0.0;
  for (const auto& iv : region) m += gaussian_interval_mass(x_, iv);
  if (!(m > 0.0)) return nullptr;
  return std::make_shared<RegressionResidualLaw>(x_, residual(), region);
}

double RegressionComponent::joint_cdf(double a, double t) const {
  const double p = retention(t);
  if (!(p > 0.0)) return 0.0;
  return p * kept_law(t)->cdf(a);
}

// --------------------------------------------------------- DiscreteComponent

DiscreteComponent::DiscreteComponent(std::vector<JointAtom> atoms, std::string label)
    : atoms_(std::move(atoms)), label_(std::move(label)) {
  if (atoms_.empty()) throw std::invalid_argument("DiscreteComponent: no atoms");
  double total = 0.0;
  std::vector<double> a;
  std::vector<double> w;
  for (const auto& at : atoms_) {
    if (!(at.mass >= 0.0) || !std::isfinite(at.a) || std::isnan(at.s)) {
      throw std::invalid_argument("DiscreteComponent: invalid atom");
    }
    total += at.mass;
    cumulative_.push_back(total);
    a.push_back(at.a);
    w.push_back(at.mass);
  }
  if (std::fabs(total - 1.0) > 1e-12) throw std::invalid_argument("DiscreteComponent: masses must sum to one");
  cumulative_.back() = 1.0;
  full_ = std::make_shared<FiniteDiscreteLaw>(std::move(a), std::move(w));
}

ScorePair DiscreteComponent::draw(Rng& rng) const {
  const double u = uniform01(rng);
  auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
  k = std::min(k, atoms_.size() - 1);
  while (atoms_[k].mass == 0.0 && k > 0) --k;
  return {atoms_[k].a, atoms_[k].s};
}

double DiscreteComponent::retention(double t) const {
  double m = 0.0;
  for (const auto& at : atoms_) {
    if (at.s <= t) m += at.mass;
  }
  return std::clamp(m, 0.0, 1.0);
}

LawPtr DiscreteComponent::restricted(bool keep, double t) const {
  std::vector<double> a;
  std::vector<double> w;
  double total = 0.0;
  for (const auto& at : atoms_) {
    if ((at.s <= t) == keep && at.mass > 0.0) {
      a.push_back(at.a);
      w.push_back(at.mass);
      total += at.mass;
    }
  }
  if (!(total > 0.0)) return nullptr;
  for (auto& x : w) x /= total;
  // Renormalisation can leave a rounding residue; fold it into the last atom.
  double s = 0.0;
  for (double x : w) s += x;
  w.back() += 1.0 - s;
  return std::make_shared<FiniteDiscreteLaw>(std::move(a), std::move(w));
}

LawPtr DiscreteComponent::kept_law(double t) const { return restricted(true, t); }

LawPtr DiscreteComponent::dropped_law(double t) const { return restricted(false, t); }

double DiscreteComponent::joint_cdf(double a, double t) const {
  double m = 0.0;
  for (const auto& at : atoms_) {
    if (at.a <= a && at.s <= t) m += at.mass;
  }
  return m;
}

// ----------------------------------------------------------------- Scenes

void ContaminationScene::validate() const {
  if (!clean || !dirty) throw std::invalid_argument("ContaminationScene: both components are required");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("ContaminationScene: epsilon must lie in [0,1)");
  if (std::isnan(threshold)) throw std::invalid_argument("ContaminationScene: threshold is NaN");
}

ScorePair draw_contaminated(const ContaminationScene& scene, Rng& rng, bool& dirty) {
  dirty = uniform01(rng) < scene.epsilon;
  return dirty ? scene.dirty->draw(rng) : scene.clean->draw(rng);
}

namespace {

LawPtr retained_mixture(double eps, double eps_tilde, double p_c, const LawPtr& keep_p, const LawPtr& keep_q) {
  if (eps == 0.0 || !keep_q || eps_tilde == 0.0) return keep_p;
  if (!keep_p || p_c == 0.0) return keep_q;
  return std::make_shared<MixtureLaw>(std::vector<double>{1.0 - eps_tilde, eps_tilde}, std::vector<LawPtr>{keep_p, keep_q});
}

RetainedProfile analytic_profile(const ContaminationScene& scene) {
  RetainedProfile pr;
  const double t = scene.threshold;
  pr.epsilon = scene.epsilon;
  pr.p_c = scene.clean->retention(t);
  pr.p_d = scene.dirty->retention(t);
  pr.mu_keep = (1.0 - scene.epsilon) * pr.p_c + scene.epsilon * pr.p_d;
  if (!(pr.mu_keep > 0.0)) throw DegenerateRetention("trimming threshold retains no calibration mass");
  pr.eps_tilde = scene.epsilon * pr.p_d / pr.mu_keep;
  pr.law_p = scene.clean->score_law();
  pr.law_q = scene.dirty->score_law();
  if (pr.p_c > 0.0) pr.law_p_keep = scene.clean->kept_law(t);
  if (pr.p_d > 0.0) pr.law_q_keep = scene.dirty->kept_law(t);
  if (pr.p_c < 1.0) pr.law_p_drop = scene.clean->dropped_law(t);
  pr.law_r = retained_mixture(scene.epsilon, pr.eps_tilde, pr.p_c, pr.law_p_keep, pr.law_q_keep);
  pr.provenance.analytic = true;
  return pr;
}

RetainedProfile sampled_profile(const ContaminationScene& scene, const MonteCarloProfile& mc) {
  if (mc.samples < 100000) throw std::invalid_argument("Monte Carlo profiles need at least 1e5 draws per component");
  const double t = scene.threshold;
  const auto collect = [&](const ScoredComponent& comp, std::uint64_t label, std::vector<double>& all,
                           std::vector<double>& kept, std::vector<double>& dropped) {
    Rng rng = make_rng(derive_seed(mc.seed, {stream::profile, label}));
    all.reserve(mc.samples);
    for (std::size_t i = 0; i < mc.samples; ++i) {
      const ScorePair p = comp.draw(rng);
      all.push_back(p.a);
      (p.s <= t ? kept : dropped).push_back(p.a);
    }
  };
  std::vector<double> c_all, c_keep, c_drop, d_all, d_keep, d_drop;
  collect(*scene.clean, 0, c_all, c_keep, c_drop);
  collect(*scene.dirty, 1, d_all, d_keep, d_drop);

  RetainedProfile pr;
  const double n = static_cast<double>(mc.samples);
  pr.epsilon = scene.epsilon;
  pr.p_c = static_cast<double>(c_keep.size()) / n;
  pr.p_d = static_cast<double>(d_keep.size()) / n;
  pr.mu_keep = (1.0 - scene.epsilon) * pr.p_c + scene.epsilon * pr.p_d;
  if (!(pr.mu_keep > 0.0)) throw DegenerateRetention("no sampled calibration point passes the trimming threshold");
  pr.eps_tilde = scene.epsilon * pr.p_d / pr.mu_keep;
  pr.law_p = std::make_shared<EmpiricalLaw>(std::move(c_all));
  pr.law_q = std::make_shared<EmpiricalLaw>(std::move(d_all));
  if (!c_keep.empty()) pr.law_p_keep = std::make_shared<EmpiricalLaw>(std::move(c_keep));
  if (!c_drop.empty()) pr.law_p_drop = std::make_shared<EmpiricalLaw>(std::move(c_drop));
  pr.provenance.dirty_kept_draws = d_keep.size();
  if (!d_keep.empty()) pr.law_q_keep = std::make_shared<EmpiricalLaw>(std::move(d_keep));
  pr.q_keep_reliable = pr.p_d == 0.0 || pr.provenance.dirty_kept_draws >= kMinRetainedDirtyDraws;
  pr.law_r = retained_mixture(scene.epsilon, pr.eps_tilde, pr.p_c, pr.law_p_keep, pr.law_q_keep);
  pr.provenance.analytic = false;
  pr.provenance.samples = mc.samples;
  pr.provenance.se_p_c = std::sqrt(pr.p_c * (1.0 - pr.p_c) / n);
  pr.provenance.se_p_d = std::sqrt(pr.p_d * (1.0 - pr.p_d) / n);
  pr.provenance.dkw_p_c = dkw_radius(static_cast<std::int64_t>(mc.samples), 0.05, Sidedness::one_sided);
  pr.provenance.dkw_p_d = pr.provenance.dkw_p_c;
  return pr;
}

}  // namespace

RetainedProfile derive_retained_profile(const ContaminationScene& scene, const ProfileMode& mode) {
  scene.validate();
  if (std::holds_alternative<MonteCarloProfile>(mode)) return sampled_profile(scene, std::get<MonteCarloProfile>(mode));
  return analytic_profile(scene);
}

double mixture_upper_bound(const RetainedProfile& profile, const GapGrid& grid) {
  if (!profile.law_p_keep || !(profile.p_c > 0.0)) {
    throw MissingComponent("mixture_upper_bound: clean retention is zero, P_keep is undefined");
  }
  const double delta = sup_cdf_gap(*profile.law_p_keep, *profile.law_p, GapSide::plus, grid);
  double dq = 0.0;
  if (profile.p_d > 0.0 && profile.law_q_keep) {
    dq = profile.q_keep_reliable ? sup_cdf_gap(*profile.law_q_keep, *profile.law_p, GapSide::plus, grid) : 1.0;
  }
  return (1.0 - profile.eps_tilde) * delta + profile.eps_tilde * dq;
}

}  // namespace trimcp
