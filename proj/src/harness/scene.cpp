#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "trimcp/errors.hpp"
#include "trimcp/harness.hpp"
#include "trimcp/rng.hpp"

namespace trimcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dirty covariate and response in every regression family: a tight response
// band around the identity line.
constexpr double kDirtyNoise = 0.05;

double sample_mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_sd(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string to_string(SceneFamily f) {
  switch (f) {
    case SceneFamily::main_heteroscedastic:
      return "main_heteroscedastic";
    case SceneFamily::perfect_rejection:
      return "perfect_rejection";
    case SceneFamily::no_separation:
      return "no_separation";
    case SceneFamily::label_only:
      return "label_only";
    case SceneFamily::separation_sweep:
      return "separation_sweep";
    case SceneFamily::custom_discrete:
      return "custom_discrete";
  }
  return "unknown";
}

std::string to_string(AnomalyKind a) {
  switch (a) {
    case AnomalyKind::none:
      return "none";
    case AnomalyKind::stein:
      return "stein";
    case AnomalyKind::mahalanobis:
      return "mahalanobis";
  }
  return "unknown";
}

std::string to_string(BackboneMode b) { return b == BackboneMode::oracle ? "oracle" : "fitted"; }

SceneFamily parse_family(const std::string& s) {
  for (auto f : {SceneFamily::main_heteroscedastic, SceneFamily::perfect_rejection, SceneFamily::no_separation,
                 SceneFamily::label_only, SceneFamily::separation_sweep, SceneFamily::custom_discrete}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown scene family '" + s + "'");
}

void SceneSpec::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0,1)");
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (!seed) throw ConfigError("a seed is required");
  try {
    validate_policy(threshold);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (family == SceneFamily::custom_discrete) {
    if (!discrete || discrete->clean.empty() || discrete->dirty.empty()) {
      throw ConfigError("custom_discrete scenes need clean and dirty atoms");
    }
  } else {
    if (fit_size < 3) throw ConfigError("fit_size must be at least 3");
    if (std::holds_alternative<ReferenceQuantile>(threshold) && reference_size < kMinReferenceSize) {
      throw ConfigError("reference_size must be at least 20");
    }
    const CleanNoise n = effective_clean_noise();
    if (!(n.base > 0.0) || n.slope < 0.0) throw ConfigError("clean noise must have a positive base and nonnegative slope");
  }
}

CleanNoise SceneSpec::effective_clean_noise() const {
  if (clean_noise) return *clean_noise;
  if (family == SceneFamily::main_heteroscedastic) return {0.6, 0.36};
  return {0.6, 0.0};
}

double SceneSpec::effective_dirty_offset() const {
  if (dirty_offset) return *dirty_offset;
  switch (family) {
    case SceneFamily::main_heteroscedastic:
      return 6.0;
    case SceneFamily::perfect_rejection:
      return 10.0;
    default:
      return 0.0;
  }
}

std::string SceneSpec::method_label() const {
  if (!name.empty()) return name;
  if (anomaly == AnomalyKind::none) return "ordinary_split";
  const std::string a = to_string(anomaly);
  char buf[64];
  if (const auto* p = std::get_if<PopulationQuantile>(&threshold)) {
    std::snprintf(buf, sizeof buf, "_population_q%.3f", p->q);
    return a + buf;
  }
  if (const auto* p = std::get_if<ReferenceQuantile>(&threshold)) {
    std::snprintf(buf, sizeof buf, "_reference_q%.3f", p->q);
    return a + buf;
  }
  if (const auto* p = std::get_if<ExplicitThreshold>(&threshold)) {
    if (std::isinf(p->t)) return "ordinary_split";
    return a + "_explicit";
  }
  return a + "_grid";
}

GeneratedScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  GeneratedScene g;
  g.scene.epsilon = spec.epsilon;

  if (spec.family == SceneFamily::custom_discrete) {
    const auto* t = std::get_if<ExplicitThreshold>(&spec.threshold);
    if (!t) throw ConfigError("custom_discrete scenes take an explicit threshold");
    try {
      g.scene.clean = std::make_shared<DiscreteComponent>(spec.discrete->clean, "clean");
      g.scene.dirty = std::make_shared<DiscreteComponent>(spec.discrete->dirty, "dirty");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    g.scene.threshold = t->t;
    g.threshold_source = std::isinf(t->t) ? "none" : "explicit";
    g.scene.validate();
    return g;
  }

  const GaussianCovariate clean_x{0.0, 1.0};
  const CleanNoise noise = spec.effective_clean_noise();
  const ResponseModel clean_y{0.0, 1.0, noise.base, noise.slope};
  const RegressionComponent sampler("clean", clean_x, clean_y, LinearBackbone{},
                                    std::make_shared<ConstantCovariateScore>());

  // Auxiliary stage: clean fitting split, then the clean reference split.
  Rng aux = make_rng(derive_seed(*spec.seed, {stream::auxiliary}));
  std::vector<double> fit_x(spec.fit_size);
  std::vector<double> fit_y(spec.fit_size);
  for (std::size_t i = 0; i < spec.fit_size; ++i) std::tie(fit_x[i], fit_y[i]) = sampler.draw_xy(aux);
  std::vector<double> ref_x(spec.reference_size);
  for (std::size_t i = 0; i < spec.reference_size; ++i) ref_x[i] = sampler.draw_xy(aux).first;

  const double mx = sample_mean(fit_x);
  const double sx = sample_sd(fit_x, mx);
  if (spec.backbone == BackboneMode::fitted) {
    const double my = sample_mean(fit_y);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < fit_x.size(); ++i) {
      sxy += (fit_x[i] - mx) * (fit_y[i] - my);
      sxx += (fit_x[i] - mx) * (fit_x[i] - mx);
    }
    g.backbone.slope = sxy / sxx;
    g.backbone.intercept = my - g.backbone.slope * mx;
  }

  switch (spec.anomaly) {
    case AnomalyKind::none:
      g.score = std::make_shared<ConstantCovariateScore>();
      break;
    case AnomalyKind::stein: {
      SteinScoreConfig cfg{mx, sx, median_heuristic_bandwidth(fit_x, derive_seed(*spec.seed, {stream::auxiliary, 1}))};
      g.stein = cfg;
      g.score = std::make_shared<SteinCovariateScore>(cfg);
      break;
    }
    case AnomalyKind::mahalanobis:
      g.score = std::make_shared<MahalanobisCovariateScore>(mx, sx);
      break;
  }

  if (std::holds_alternative<ThresholdGrid>(spec.threshold)) {
    throw ConfigError("grid policies need a selection route; experiments take a single threshold");
  }
  if (spec.anomaly == AnomalyKind::none) {
    g.scene.threshold = kInf;
    g.threshold_source = "none";
  } else {
    try {
      const ResolvedThreshold r = resolve_threshold(spec.threshold, *g.score, clean_x, ref_x);
      g.scene.threshold = r.value();
      g.threshold_source = std::isinf(g.scene.threshold) ? "none" : r.source;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  g.scene.clean = std::make_shared<RegressionComponent>("clean", clean_x, clean_y, g.backbone, g.score);
  GaussianCovariate dirty_x{spec.effective_dirty_offset(), 1.0};
  ResponseModel dirty_y{0.0, 1.0, kDirtyNoise, 0.0};
  if (spec.family == SceneFamily::label_only) {
    dirty_x = clean_x;
    dirty_y.intercept = spec.label_offset;
  }
  g.scene.dirty = std::make_shared<RegressionComponent>("dirty", dirty_x, dirty_y, g.backbone, g.score);
  g.scene.validate();
  return g;
}

}  // namespace trimcp
