#include "trimcp/scorelaw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "trimcp/errors.hpp"
#include "trimcp/numkernel.hpp"
#include "trimcp/rng.hpp"

namespace trimcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_level(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile level must lie in (0,1)");
}

// P(lo_z < Z <= hi_z) for standard normal Z, evaluated in the tail that
// avoids cancellation.
double normal_mass(double lo_z, double hi_z) {
  if (!(hi_z > lo_z)) return 0.0;
  if (lo_z >= 0.0) return std::max(0.0, normal_sf(lo_z) - normal_sf(hi_z));
  if (hi_z <= 0.0) return std::max(0.0, normal_cdf(hi_z) - normal_cdf(lo_z));
  return std::max(0.0, 1.0 - normal_cdf(lo_z) - normal_sf(hi_z));
}

// Draw from N(0,1) truncated to [lo_z, hi_z] by inverse transform.
double truncated_standard_normal(double lo_z, double hi_z, double u) {
  double z;
  if (lo_z >= 0.0) {
    const double a = normal_sf(lo_z);
    const double b = normal_sf(hi_z);
    const double p = a - u * (a - b);
    z = -normal_quantile(std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 1e-16));
  } else {
    const double a = normal_cdf(lo_z);
    const double b = normal_cdf(hi_z);
    const double p = a + u * (b - a);
    z = normal_quantile(std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 1e-16));
  }
  return std::clamp(z, lo_z, hi_z);
}

}  // namespace

double ScoreLaw::lower_quantile(double u) const {
  check_level(u);
  auto [lo, hi] = bracket();
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  double step = std::max(hi - lo, 1.0);
  while (cdf(lo) >= u) {
    lo -= step;
    step *= 2.0;
    if (!std::isfinite(lo)) return -kInf;
  }
  step = std::max(hi - lo, 1.0);
  while (cdf(hi) < u) {
    hi += step;
    step *= 2.0;
    if (!std::isfinite(hi)) return kInf;
  }
  // Invariant: cdf(lo) < u <= cdf(hi).
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    if (cdf(mid) >= u) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::vector<double> ScoreLaw::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) {
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    v = lower_quantile(u);
  }
  return out;
}

// ---------------------------------------------------------------- Gaussian

GaussianLaw::GaussianLaw(double mean, double sd) : mean_(mean), sd_(sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    throw std::invalid_argument("GaussianLaw: sd must be positive and finite");
  }
}

double GaussianLaw::cdf(double a) const { return normal_cdf((a - mean_) / sd_); }

double GaussianLaw::lower_quantile(double u) const {
  check_level(u);
  return mean_ + sd_ * normal_quantile(u);
}

std::vector<double> GaussianLaw::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = mean_ + sd_ * standard_normal(rng);
  return out;
}

std::pair<double, double> GaussianLaw::bracket() const { return {mean_ - 8.0 * sd_, mean_ + 8.0 * sd_}; }

// -------------------------------------------------------------- HalfNormal

HalfNormalLaw::HalfNormalLaw(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("HalfNormalLaw: sigma must be positive");
}

double HalfNormalLaw::cdf(double a) const {
  if (a <= 0.0) return 0.0;
  return normal_mass(-a / sigma_, a / sigma_);
}

double HalfNormalLaw::lower_quantile(double u) const {
  check_level(u);
  // P(|Z| <= z) = u  <=>  P(Z > z) = (1 - u) / 2.
  return -sigma_ * normal_quantile(0.5 * (1.0 - u));
}

std::vector<double> HalfNormalLaw::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = sigma_ * std::fabs(standard_normal(rng));
  return out;
}

// --------------------------------------------------------------- Empirical

EmpiricalLaw::EmpiricalLaw(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw std::invalid_argument("EmpiricalLaw: empty sample");
  for (double v : sorted_) {
    if (std::isnan(v)) throw std::invalid_argument("EmpiricalLaw: NaN in sample");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalLaw::cdf(double a) const {
  const auto k = std::upper_bound(sorted_.begin(), sorted_.end(), a) - sorted_.begin();
  return static_cast<double>(k) / static_cast<double>(sorted_.size());
}

double EmpiricalLaw::cdf_left(double a) const {
  const auto k = std::lower_bound(sorted_.begin(), sorted_.end(), a) - sorted_.begin();
  return static_cast<double>(k) / static_cast<double>(sorted_.size());
}

double EmpiricalLaw::lower_quantile(double u) const {
  check_level(u);
  const double n = static_cast<double>(sorted_.size());
  auto k = static_cast<std::size_t>(std::ceil(u * n));
  // Guard against u * n rounding up past an exact integer.
  if (k > 1 && static_cast<double>(k - 1) / n >= u) --k;
  k = std::clamp<std::size_t>(k, 1, sorted_.size());
  return sorted_[k - 1];
}

std::vector<double> EmpiricalLaw::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  std::uniform_int_distribution<std::size_t> pick(0, sorted_.size() - 1);
  for (auto& v : out) v = sorted_[pick(rng)];
  return out;
}

std::vector<double> EmpiricalLaw::support_points() const {
  std::vector<double> pts = sorted_;
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// --------------------------------------------------------- PiecewiseLinear

PiecewiseLinearCdfLaw::PiecewiseLinearCdfLaw(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() != values.size() || knots.size() < 2) {
    throw std::invalid_argument("PiecewiseLinearCdfLaw: need at least two knots with matching values");
  }
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!std::isfinite(knots[i]) || !std::isfinite(values[i])) {
      throw std::invalid_argument("PiecewiseLinearCdfLaw: knots and values must be finite");
    }
    if (i > 0 && knots[i] < knots[i - 1]) throw std::invalid_argument("PiecewiseLinearCdfLaw: knots must be sorted");
    if (i > 0 && values[i] < values[i - 1]) {
      throw std::invalid_argument("PiecewiseLinearCdfLaw: values must be nondecreasing");
    }
    if (i > 0 && knots[i] == knots[i - 1]) {
      if (std::fabs(values[i] - values[i - 1]) > 1e-15) {
        throw std::invalid_argument("PiecewiseLinearCdfLaw: repeated knot with a jump");
      }
      continue;
    }
    knots_.push_back(knots[i]);
    values_.push_back(values[i]);
  }
  if (knots_.size() < 2) throw std::invalid_argument("PiecewiseLinearCdfLaw: need two distinct knots");
  if (std::fabs(values_.front()) > 1e-12 || std::fabs(values_.back() - 1.0) > 1e-12) {
    throw std::invalid_argument("PiecewiseLinearCdfLaw: CDF must run from 0 to 1");
  }
  values_.front() = 0.0;
  values_.back() = 1.0;
}

double PiecewiseLinearCdfLaw::cdf(double a) const {
  if (a <= knots_.front()) return 0.0;
  if (a >= knots_.back()) return 1.0;
  const auto j = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), a) - knots_.begin());
  const double t = (a - knots_[j - 1]) / (knots_[j] - knots_[j - 1]);
  return values_[j - 1] + t * (values_[j] - values_[j - 1]);
}

double PiecewiseLinearCdfLaw::lower_quantile(double u) const {
  check_level(u);
  const auto j = static_cast<std::size_t>(std::lower_bound(values_.begin(), values_.end(), u) - values_.begin());
  const double t = (u - values_[j - 1]) / (values_[j] - values_[j - 1]);
  return knots_[j - 1] + t * (knots_[j] - knots_[j - 1]);
}

// ----------------------------------------------------------- FiniteDiscrete

FiniteDiscreteLaw::FiniteDiscreteLaw(std::vector<double> atoms, std::vector<double> masses) {
  if (atoms.size() != masses.size() || atoms.empty()) {
    throw std::invalid_argument("FiniteDiscreteLaw: atoms and masses must be nonempty and of equal length");
  }
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });
  double total = 0.0;
  for (std::size_t i : order) {
    if (!(masses[i] >= 0.0) || !std::isfinite(atoms[i])) {
      throw std::invalid_argument("FiniteDiscreteLaw: masses must be nonnegative and atoms finite");
    }
    total += masses[i];
    if (masses[i] == 0.0) continue;
    if (!atoms_.empty() && atoms_.back() == atoms[i]) {
      masses_.back() += masses[i];
    } else {
      atoms_.push_back(atoms[i]);
      masses_.push_back(masses[i]);
    }
  }
  if (std::fabs(total - 1.0) > 1e-12) throw std::invalid_argument("FiniteDiscreteLaw: masses must sum to one");
  if (atoms_.empty()) throw std::invalid_argument("FiniteDiscreteLaw: no atom with positive mass");
  cumulative_.resize(masses_.size());
  std::partial_sum(masses_.begin(), masses_.end(), cumulative_.begin());
  cumulative_.back() = 1.0;
}

double FiniteDiscreteLaw::cdf(double a) const {
  const auto k = std::upper_bound(atoms_.begin(), atoms_.end(), a) - atoms_.begin();
  return k == 0 ? 0.0 : cumulative_[static_cast<std::size_t>(k - 1)];
}

double FiniteDiscreteLaw::cdf_left(double a) const {
  const auto k = std::lower_bound(atoms_.begin(), atoms_.end(), a) - atoms_.begin();
  return k == 0 ? 0.0 : cumulative_[static_cast<std::size_t>(k - 1)];
}

double FiniteDiscreteLaw::lower_quantile(double u) const {
  check_level(u);
  const auto k = std::lower_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin();
  return atoms_[std::min(static_cast<std::size_t>(k), atoms_.size() - 1)];
}

std::vector<double> FiniteDiscreteLaw::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) {
    const double u = uniform01(rng);
    const auto k = std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin();
    v = atoms_[std::min(static_cast<std::size_t>(k), atoms_.size() - 1)];
  }
  return out;
}

// ------------------------------------------------------------------ Mixture

MixtureLaw::MixtureLaw(std::vector<double> weights, std::vector<LawPtr> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (weights_.size() != components_.size() || weights_.empty()) {
    throw std::invalid_argument("MixtureLaw: weights and components must be nonempty and of equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0)) throw std::invalid_argument("MixtureLaw: negative weight");
    if (weights_[i] > 0.0 && !components_[i]) throw std::invalid_argument("MixtureLaw: missing component law");
    total += weights_[i];
  }
  if (std::fabs(total - 1.0) > 1e-12) throw std::invalid_argument("MixtureLaw: weights must sum to one");
}

double MixtureLaw::cdf(double a) const {
  double s = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] > 0.0) s += weights_[i] * components_[i]->cdf(a);
  }
  return std::clamp(s, 0.0, 1.0);
}

double MixtureLaw::cdf_left(double a) const {
  double s = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] > 0.0) s += weights_[i] * components_[i]->cdf_left(a);
  }
  return std::clamp(s, 0.0, 1.0);
}

std::vector<double> MixtureLaw::sample(std::uint64_t seed, std::size_t n) const {
  Rng rng = make_rng(seed);
  std::vector<std::size_t> choice(n);
  std::vector<std::size_t> counts(weights_.size(), 0);
  for (auto& c : choice) {
    const double u = uniform01(rng);
    double acc = 0.0;
    c = weights_.size() - 1;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      if (u < acc && weights_[i] > 0.0) {
        c = i;
        break;
      }
    }
    while (weights_[c] == 0.0) --c;
    ++counts[c];
  }
  std::vector<std::vector<double>> draws(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (counts[i] > 0) draws[i] = components_[i]->sample(derive_seed(seed, {i}), counts[i]);
  }
  std::vector<std::size_t> used(weights_.size(), 0);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = draws[choice[k]][used[choice[k]]++];
  return out;
}

LawKind MixtureLaw::kind() const {
  bool all_cont = true;
  bool all_finite = true;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    const LawKind k = components_[i]->kind();
    all_cont = all_cont && k == LawKind::continuous;
    all_finite = all_finite && k == LawKind::finite;
  }
  if (all_cont) return LawKind::continuous;
  if (all_finite) return LawKind::finite;
  return LawKind::mixed;
}

std::vector<double> MixtureLaw::support_points() const {
  std::vector<double> pts;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    const auto p = components_[i]->support_points();
    pts.insert(pts.end(), p.begin(), p.end());
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

bool MixtureLaw::exact_support() const {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] > 0.0 && !components_[i]->exact_support()) return false;
  }
  return true;
}

std::pair<double, double> MixtureLaw::bracket() const {
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    const auto [a, b] = components_[i]->bracket();
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  return {lo, hi};
}

// -------------------------------------------------------------- Conditioned

ConditionedLaw::ConditionedLaw(LawPtr base, double lo, double hi) : base_(std::move(base)), lo_(lo), hi_(hi) {
  if (!base_) throw std::invalid_argument("ConditionedLaw: missing base law");
  if (!(lo <= hi)) throw std::invalid_argument("ConditionedLaw: empty event");
  below_ = std::isfinite(lo) ? base_->cdf_left(lo) : 0.0;
  accept_ = (std::isfinite(hi) ? base_->cdf(hi) : 1.0) - below_;
  if (!(accept_ > 0.0)) throw MissingComponent("ConditionedLaw: conditioning event has zero probability");
}

double ConditionedLaw::cdf(double a) const {
  if (a < lo_) return 0.0;
  if (a >= hi_) return 1.0;
  return std::clamp((base_->cdf(a) - below_) / accept_, 0.0, 1.0);
}

double ConditionedLaw::cdf_left(double a) const {
  if (a <= lo_) return 0.0;
  if (a > hi_) return 1.0;
  return std::clamp((base_->cdf_left(a) - below_) / accept_, 0.0, 1.0);
}

std::vector<double> ConditionedLaw::sample(std::uint64_t seed, std::size_t n) const {
  std::vector<double> out;
  out.reserve(n);
  std::size_t attempts = 0;
  std::uint64_t round = 0;
  while (out.size() < n) {
    const std::size_t want = n - out.size();
    const double guess = static_cast<double>(want) / std::max(accept_, 1e-12) * 1.1 + 16.0;
    const std::size_t batch = static_cast<std::size_t>(
        std::min(guess, static_cast<double>(kMaxAttempts - std::min(attempts, kMaxAttempts))));
    if (batch == 0) {
      throw SamplingBudgetExceeded("ConditionedLaw: rejection sampling exceeded " +
                                   std::to_string(kMaxAttempts) + " proposals");
    }
    attempts += batch;
    for (double v : base_->sample(derive_seed(seed, {round++}), batch)) {
      if (v >= lo_ && v <= hi_ && out.size() < n) out.push_back(v);
    }
  }
  return out;
}

std::vector<double> ConditionedLaw::support_points() const {
  std::vector<double> pts;
  for (double p : base_->support_points()) {
    if (p >= lo_ && p <= hi_) pts.push_back(p);
  }
  if (std::isfinite(lo_)) pts.push_back(lo_);
  if (std::isfinite(hi_)) pts.push_back(hi_);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

std::pair<double, double> ConditionedLaw::bracket() const {
  auto [a, b] = base_->bracket();
  a = std::isfinite(lo_) ? std::max(a, lo_) : a;
  b = std::isfinite(hi_) ? std::min(b, hi_) : b;
  if (!(b >= a)) {
    a = std::isfinite(lo_) ? lo_ : hi_;
    b = std::isfinite(hi_) ? hi_ : lo_;
  }
  return {a, b};
}

// --------------------------------------------------- RegressionResidualLaw

double gaussian_interval_mass(GaussianCovariate x, CovariateInterval iv) {
  if (!(iv.hi > iv.lo)) return 0.0;
  return normal_mass((iv.lo - x.mean) / x.sd, (iv.hi - x.mean) / x.sd);
}

namespace {

// P(|N(c, s^2)| <= a).
double folded_cdf(double a, double c, double s) {
  if (a <= 0.0) return 0.0;
  return normal_mass((-a - c) / s, (a - c) / s);
}

}  // namespace

RegressionResidualLaw::RegressionResidualLaw(GaussianCovariate x, ResidualModel residual,
                                             std::vector<CovariateInterval> region)
    : x_(x), residual_(residual), region_(std::move(region)) {
  if (!(x_.sd > 0.0)) throw std::invalid_argument("RegressionResidualLaw: covariate sd must be positive");
  if (!(residual_.noise_base > 0.0) || residual_.noise_slope < 0.0) {
    throw std::invalid_argument("RegressionResidualLaw: noise scale must be positive");
  }
  // Split pieces at the kink of |x| so each panel integrates a smooth function.
  std::vector<CovariateInterval> pieces;
  for (const auto& iv : region_) {
    if (!(iv.lo <= iv.hi)) throw std::invalid_argument("RegressionResidualLaw: malformed interval");
    if (residual_.noise_slope != 0.0 && iv.lo < 0.0 && iv.hi > 0.0) {
      pieces.push_back({iv.lo, 0.0});
      pieces.push_back({0.0, iv.hi});
    } else {
      pieces.push_back(iv);
    }
  }
  const QuadratureRule& gl = gauss_legendre_unit(16);
  std::vector<double> log_w;
  for (const auto& piece : pieces) {
    const double m = gaussian_interval_mass(x_, piece);
    if (!(m > 0.0)) continue;
    piece_mass_.push_back(m);
    mass_ += m;
    // Integration window: the part of the piece carrying non-negligible density.
    const double c = std::clamp(x_.mean, piece.lo, piece.hi);
    const double dist = std::fabs(c - x_.mean);
    double half = 10.0 * x_.sd;
    if (dist > 0.0) half = std::min(half, 60.0 * x_.sd * x_.sd / dist);
    const double a = std::max(piece.lo, c - half);
    const double b = std::min(piece.hi, c + half);
    if (!(b > a)) continue;
    double h = x_.sd;
    if (residual_.slope != 0.0) {
      const double min_abs_x = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::fabs(a), std::fabs(b));
      const double smin = residual_.noise_base + residual_.noise_slope * min_abs_x;
      h = std::min(h, smin / std::fabs(residual_.slope));
    }
    const auto panels = static_cast<std::size_t>(std::clamp(std::ceil((b - a) / h), 1.0, 4000.0));
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double left = a + width * static_cast<double>(p);
      for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
        const double xv = left + width * gl.nodes[k];
        const double z = (xv - x_.mean) / x_.sd;
        log_w.push_back(std::log(gl.weights[k] * width) - 0.5 * z * z);
        node_center_.push_back(residual_.offset + residual_.slope * xv);
        node_scale_.push_back(residual_.noise_base + residual_.noise_slope * std::fabs(xv));
      }
    }
  }
  if (!(mass_ > 0.0) || log_w.empty()) {
    throw MissingComponent("RegressionResidualLaw: covariate region has zero probability");
  }
  const double mx = *std::max_element(log_w.begin(), log_w.end());
  node_weight_.resize(log_w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    node_weight_[i] = std::exp(log_w[i] - mx);
    total += node_weight_[i];
  }
  for (auto& w : node_weight_) w /= total;
}

double RegressionResidualLaw::cdf(double a) const {
  if (a <= 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < node_weight_.size(); ++i) {
    s += node_weight_[i] * folded_cdf(a, node_center_[i], node_scale_[i]);
  }
  return std::clamp(s, 0.0, 1.0);
}

double RegressionResidualLaw::pdf(double a) const {
  if (a < 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < node_weight_.size(); ++i) {
    const double c = node_center_[i];
    const double sc = node_scale_[i];
    s += node_weight_[i] * (normal_pdf((a - c) / sc) + normal_pdf((a + c) / sc)) / sc;
  }
  return s;
}

double RegressionResidualLaw::lower_quantile(double u) const {
  check_level(u);
  double lo = 0.0;
  double hi = bracket().second;
  while (cdf(hi) < u) {
    hi *= 2.0;
    if (!std::isfinite(hi)) return kInf;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = cdf(x) - u;
    if (f >= 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    if (std::fabs(f) <= 1e-14 || hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    const double d = pdf(x);
    double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  // Return a point with cdf >= u, as the lower quantile requires.
  double step = 1e-15 * std::max(1.0, x);
  while (cdf(x) < u && x < hi) {
    x = std::min(hi, x + step);
    step *= 2.0;
  }
  return x;
}

std::vector<double> RegressionResidualLaw::sample(std::uint64_t seed, std::size_t n) const {
  std::vector<CovariateInterval> pieces;
  for (const auto& iv : region_) {
    if (residual_.noise_slope != 0.0 && iv.lo < 0.0 && iv.hi > 0.0) {
      pieces.push_back({iv.lo, 0.0});
      pieces.push_back({0.0, iv.hi});
    } else {
      pieces.push_back(iv);
    }
  }
  std::vector<CovariateInterval> live;
  std::vector<double> cum;
  double acc = 0.0;
  for (const auto& p : pieces) {
    const double m = gaussian_interval_mass(x_, p);
    if (!(m > 0.0)) continue;
    acc += m;
    live.push_back(p);
    cum.push_back(acc);
  }
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) {
    const double pick = uniform01(rng) * acc;
    const auto k = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()), live.size() - 1);
    const double z = truncated_standard_normal((live[k].lo - x_.mean) / x_.sd, (live[k].hi - x_.mean) / x_.sd,
                                               uniform01(rng));
    const double xv = x_.mean + x_.sd * z;
    const double r = residual_.offset + residual_.slope * xv +
                     (residual_.noise_base + residual_.noise_slope * std::fabs(xv)) * standard_normal(rng);
    v = std::fabs(r);
  }
  return out;
}

std::pair<double, double> RegressionResidualLaw::bracket() const {
  double hi = 0.0;
  for (std::size_t i = 0; i < node_center_.size(); ++i) {
    hi = std::max(hi, std::fabs(node_center_[i]) + 9.0 * node_scale_[i]);
  }
  return {0.0, hi};
}

// ---------------------------------------------------------------- CDF gaps

GapExtrema cdf_gap_extrema(const ScoreLaw& m, const ScoreLaw& n, const GapGrid& grid) {
  GapExtrema out;
  const auto consider = [&](double a, double diff) {
    if (diff > out.plus) {
      out.plus = diff;
      out.argmax_plus = a;
    }
    if (-diff > out.minus) {
      out.minus = -diff;
      out.argmax_minus = a;
    }
  };
  const auto eval = [&](double a) {
    consider(a, m.cdf(a) - n.cdf(a));
    consider(a, m.cdf_left(a) - n.cdf_left(a));
  };

  std::vector<double> pts = m.support_points();
  {
    const auto q = n.support_points();
    pts.insert(pts.end(), q.begin(), q.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  }
  const bool exact = grid.mode == GapGrid::Mode::exact_support ||
                     (grid.mode == GapGrid::Mode::automatic && m.exact_support() && n.exact_support());
  for (double a : pts) eval(a);
  if (exact && !pts.empty()) {
    out.plus = std::clamp(out.plus, 0.0, 1.0);
    out.minus = std::clamp(out.minus, 0.0, 1.0);
    return out;
  }

  const double lo = std::min(m.lower_quantile(grid.tail), n.lower_quantile(grid.tail));
  const double hi = std::max(m.lower_quantile(1.0 - grid.tail), n.lower_quantile(1.0 - grid.tail));
  const std::size_t count = std::max<std::size_t>(grid.points, 3);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  if (step > 0.0 && std::isfinite(step)) {
    for (std::size_t i = 0; i < count; ++i) eval(lo + step * static_cast<double>(i));
    if (grid.refine) {
      const std::size_t fine = 2001;
      for (double center : {out.argmax_plus, out.argmax_minus}) {
        const double a0 = center - step;
        const double fine_step = 2.0 * step / static_cast<double>(fine - 1);
        for (std::size_t i = 0; i < fine; ++i) eval(a0 + fine_step * static_cast<double>(i));
      }
    }
  } else {
    eval(lo);
  }
  out.plus = std::clamp(out.plus, 0.0, 1.0);
  out.minus = std::clamp(out.minus, 0.0, 1.0);
  return out;
}

double sup_cdf_gap(const ScoreLaw& m, const ScoreLaw& n, GapSide side, const GapGrid& grid) {
  const GapExtrema e = cdf_gap_extrema(m, n, grid);
  switch (side) {
    case GapSide::plus:
      return e.plus;
    case GapSide::minus:
      return e.minus;
    case GapSide::two_sided:
      return std::max(e.plus, e.minus);
  }
  return std::max(e.plus, e.minus);
}

std::pair<LawPtr, LawPtr> make_sharpness_pair(double d) {
  if (!(d >= 0.0 && d <= 1.0)) throw std::domain_error("make_sharpness_pair: d outside [0,1]");
  auto r = std::make_shared<PiecewiseLinearCdfLaw>(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0});
  std::vector<double> knots{0.0, d, 1.0, 2.0};
  std::vector<double> values{0.0, 0.0, 1.0 - d, 1.0};
  auto p = std::make_shared<PiecewiseLinearCdfLaw>(std::move(knots), std::move(values));
  return {r, p};
}

}  // namespace trimcp
