#include <cmath>
#include <initializer_list>
#include <limits>
#include <set>
#include <string>

#include "trimcp/errors.hpp"
#include "trimcp/harness.hpp"

namespace trimcp {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + what);
  }
}

// Numbers are stored as JSON numbers; non-finite values as "inf", "-inf" or null.
json encode(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double decode(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError(what + " must be a number");
}

template <class T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(what + " has the wrong type");
  }
}

std::uint64_t get_u64(const json& j, const std::string& what) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw ConfigError(what + " must be a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

json encode_policy(const ThresholdPolicy& p) {
  if (const auto* q = std::get_if<PopulationQuantile>(&p)) return {{"kind", "population_quantile"}, {"q", q->q}};
  if (const auto* q = std::get_if<ReferenceQuantile>(&p)) return {{"kind", "reference_quantile"}, {"q", q->q}};
  if (const auto* e = std::get_if<ExplicitThreshold>(&p)) return {{"kind", "explicit"}, {"t", encode(e->t)}};
  return {{"kind", "grid"}, {"values", std::get<ThresholdGrid>(p).values}};
}

ThresholdPolicy parse_policy(const json& j) {
  require_object(j, "threshold");
  check_keys(j, {"kind", "q", "t", "values"}, "threshold");
  if (!j.contains("kind")) throw ConfigError("threshold needs a 'kind'");
  const auto kind = get_as<std::string>(j.at("kind"), "threshold.kind");
  if (kind == "population_quantile" || kind == "reference_quantile") {
    if (!j.contains("q")) throw ConfigError("threshold '" + kind + "' needs 'q'");
    const double q = decode(j.at("q"), "threshold.q");
    if (kind == "population_quantile") return PopulationQuantile{q};
    return ReferenceQuantile{q};
  }
  if (kind == "explicit") {
    if (!j.contains("t")) throw ConfigError("explicit threshold needs 't'");
    return ExplicitThreshold{decode(j.at("t"), "threshold.t")};
  }
  if (kind == "none") return ExplicitThreshold{kInf};
  if (kind == "grid") {
    if (!j.contains("values")) throw ConfigError("grid threshold needs 'values'");
    return ThresholdGrid{get_as<std::vector<double>>(j.at("values"), "threshold.values")};
  }
  throw ConfigError("unknown threshold kind '" + kind + "'");
}

std::vector<JointAtom> parse_atoms(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a nonempty array");
  std::vector<JointAtom> out;
  for (const auto& a : j) {
    require_object(a, what + " entry");
    check_keys(a, {"a", "s", "mass"}, what);
    if (!a.contains("a") || !a.contains("s") || !a.contains("mass")) throw ConfigError(what + " entries need a, s, mass");
    out.push_back({decode(a.at("a"), "a"), decode(a.at("s"), "s"), decode(a.at("mass"), "mass")});
  }
  return out;
}

json encode_atoms(const std::vector<JointAtom>& atoms) {
  json arr = json::array();
  for (const auto& a : atoms) arr.push_back({{"a", a.a}, {"s", a.s}, {"mass", a.mass}});
  return arr;
}

void check_schema(const json& j) {
  if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
  if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw ConfigError("unsupported schema_version (expected 1)");
  }
}

SceneSpec parse_scene_body(const json& j, bool top_level) {
  require_object(j, "scene");
  check_keys(j,
             {"schema_version", "name", "family", "epsilon", "m", "alpha", "anomaly", "threshold", "reps", "n_test",
              "seed", "backbone", "clean_noise", "dirty_offset", "label_offset", "fit_size", "reference_size",
              "diagnostic_size", "audit_size", "discrete"},
             "scene");
  if (top_level) check_schema(j);
  SceneSpec s;
  if (j.contains("name")) s.name = get_as<std::string>(j.at("name"), "name");
  if (j.contains("family")) s.family = parse_family(get_as<std::string>(j.at("family"), "family"));
  if (j.contains("epsilon")) s.epsilon = decode(j.at("epsilon"), "epsilon");
  if (j.contains("m")) s.m = static_cast<std::int64_t>(get_u64(j.at("m"), "m"));
  if (j.contains("alpha")) s.alpha = decode(j.at("alpha"), "alpha");
  if (j.contains("anomaly")) {
    const auto a = get_as<std::string>(j.at("anomaly"), "anomaly");
    if (a == "none") {
      s.anomaly = AnomalyKind::none;
    } else if (a == "stein") {
      s.anomaly = AnomalyKind::stein;
    } else if (a == "mahalanobis") {
      s.anomaly = AnomalyKind::mahalanobis;
    } else {
      throw ConfigError("unknown anomaly score '" + a + "'");
    }
  }
  if (j.contains("threshold")) s.threshold = parse_policy(j.at("threshold"));
  if (s.anomaly == AnomalyKind::none && !j.contains("threshold")) s.threshold = ExplicitThreshold{kInf};
  if (j.contains("reps")) s.reps = get_u64(j.at("reps"), "reps");
  if (j.contains("n_test")) s.n_test = get_u64(j.at("n_test"), "n_test");
  if (j.contains("seed")) s.seed = get_u64(j.at("seed"), "seed");
  if (j.contains("backbone")) {
    const auto b = get_as<std::string>(j.at("backbone"), "backbone");
    if (b == "oracle") {
      s.backbone = BackboneMode::oracle;
    } else if (b == "fitted") {
      s.backbone = BackboneMode::fitted;
    } else {
      throw ConfigError("unknown backbone '" + b + "'");
    }
  }
  if (j.contains("clean_noise")) {
    const json& n = j.at("clean_noise");
    require_object(n, "clean_noise");
    check_keys(n, {"base", "slope"}, "clean_noise");
    CleanNoise c;
    if (n.contains("base")) c.base = decode(n.at("base"), "clean_noise.base");
    c.slope = n.contains("slope") ? decode(n.at("slope"), "clean_noise.slope") : 0.0;
    s.clean_noise = c;
  }
  if (j.contains("dirty_offset")) s.dirty_offset = decode(j.at("dirty_offset"), "dirty_offset");
  if (j.contains("label_offset")) s.label_offset = decode(j.at("label_offset"), "label_offset");
  if (j.contains("fit_size")) s.fit_size = get_u64(j.at("fit_size"), "fit_size");
  if (j.contains("reference_size")) s.reference_size = get_u64(j.at("reference_size"), "reference_size");
  if (j.contains("diagnostic_size")) s.diagnostic_size = get_u64(j.at("diagnostic_size"), "diagnostic_size");
  if (j.contains("audit_size")) s.audit_size = get_u64(j.at("audit_size"), "audit_size");
  if (j.contains("discrete")) {
    const json& d = j.at("discrete");
    require_object(d, "discrete");
    check_keys(d, {"clean", "dirty"}, "discrete");
    if (!d.contains("clean") || !d.contains("dirty")) throw ConfigError("discrete needs 'clean' and 'dirty'");
    s.discrete = DiscreteSceneSpec{parse_atoms(d.at("clean"), "discrete.clean"), parse_atoms(d.at("dirty"), "discrete.dirty")};
  }
  return s;
}

json encode_summary(const Summary& s) {
  return {{"mean", encode(s.mean)}, {"sd", encode(s.sd)}, {"lo", encode(s.lo)}, {"hi", encode(s.hi)}};
}

Summary decode_summary(const json& j) {
  return {decode(j.at("mean"), "mean"), decode(j.at("sd"), "sd"), decode(j.at("lo"), "lo"), decode(j.at("hi"), "hi")};
}

json encode_optional(const std::optional<double>& v) { return v ? encode(*v) : json(nullptr); }

std::optional<double> decode_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return decode(j, "value");
}

DiagnosticReport decode_report(const json& j) {
  DiagnosticReport r;
  r.alpha = decode(j.at("alpha"), "alpha");
  r.m = j.at("m").get<std::int64_t>();
  r.epsilon = decode(j.at("epsilon"), "epsilon");
  r.p_c = decode(j.at("p_c"), "p_c");
  r.p_d = decode(j.at("p_d"), "p_d");
  r.mu_keep = decode(j.at("mu_keep"), "mu_keep");
  r.eps_tilde = decode(j.at("eps_tilde"), "eps_tilde");
  r.delta_trim_plus = decode(j.at("delta_trim_plus"), "delta_trim_plus");
  r.delta_trim_minus = decode(j.at("delta_trim_minus"), "delta_trim_minus");
  r.delta_trim_two = decode(j.at("delta_trim_two"), "delta_trim_two");
  r.d_direct_plus = decode(j.at("d_direct_plus"), "d_direct_plus");
  r.d_mirror_plus = decode(j.at("d_mirror_plus"), "d_mirror_plus");
  r.D_Q_plus = decode_optional(j.at("D_Q_plus"));
  r.D_Q_minus = decode_optional(j.at("D_Q_minus"));
  r.dirty_contribution = decode(j.at("dirty_contribution"), "dirty_contribution");
  r.delta_mix_plus = decode(j.at("delta_mix_plus"), "delta_mix_plus");
  r.l_mix_uses_fallback = j.at("l_mix_uses_fallback").get<bool>();
  r.exact_coverage = decode_optional(j.at("exact_coverage"));
  r.L_fs_at_direct = decode(j.at("L_fs_at_direct"), "L_fs_at_direct");
  r.L_fs_at_mixture = decode(j.at("L_fs_at_mixture"), "L_fs_at_mixture");
  r.L_mix_plus = decode(j.at("L_mix_plus"), "L_mix_plus");
  r.beta_m = decode(j.at("beta_m"), "beta_m");
  r.coverage_upper = decode(j.at("coverage_upper"), "coverage_upper");
  r.upper_atoms_warning = j.at("upper_atoms_warning").get<bool>();
  r.provenance = j.at("provenance").get<std::string>();
  return r;
}

}  // namespace

SceneSpec parse_scene_spec(const json& j) { return parse_scene_body(j, true); }

json to_json(const SceneSpec& s) {
  json j = {{"schema_version", kSchemaVersion},
            {"name", s.name},
            {"family", to_string(s.family)},
            {"epsilon", s.epsilon},
            {"m", s.m},
            {"alpha", s.alpha},
            {"anomaly", to_string(s.anomaly)},
            {"threshold", encode_policy(s.threshold)},
            {"reps", s.reps},
            {"n_test", s.n_test},
            {"backbone", to_string(s.backbone)},
            {"label_offset", s.label_offset},
            {"fit_size", s.fit_size},
            {"reference_size", s.reference_size},
            {"diagnostic_size", s.diagnostic_size},
            {"audit_size", s.audit_size}};
  if (s.seed) j["seed"] = *s.seed;
  if (s.clean_noise) j["clean_noise"] = {{"base", s.clean_noise->base}, {"slope", s.clean_noise->slope}};
  if (s.dirty_offset) j["dirty_offset"] = *s.dirty_offset;
  if (s.discrete) j["discrete"] = {{"clean", encode_atoms(s.discrete->clean)}, {"dirty", encode_atoms(s.discrete->dirty)}};
  return j;
}

SweepSpec parse_sweep_spec(const json& j) {
  require_object(j, "sweep");
  check_keys(j, {"schema_version", "base", "axis"}, "sweep");
  check_schema(j);
  if (!j.contains("base") || !j.contains("axis")) throw ConfigError("sweep needs 'base' and 'axis'");
  SweepSpec s;
  s.base = parse_scene_body(j.at("base"), false);
  const json& a = j.at("axis");
  require_object(a, "axis");
  check_keys(a, {"name", "values"}, "axis");
  if (!a.contains("name") || !a.contains("values")) throw ConfigError("axis needs 'name' and 'values'");
  s.axis = parse_axis(get_as<std::string>(a.at("name"), "axis.name"));
  s.values = get_as<std::vector<double>>(a.at("values"), "axis.values");
  if (s.values.empty()) throw ConfigError("axis.values is empty");
  return s;
}

LawPtr parse_law(const json& j) {
  require_object(j, "law");
  if (!j.contains("type")) throw ConfigError("law needs a 'type'");
  const auto type = get_as<std::string>(j.at("type"), "law.type");
  try {
    if (type == "finite") {
      check_keys(j, {"type", "atoms", "masses"}, "finite law");
      return std::make_shared<FiniteDiscreteLaw>(get_as<std::vector<double>>(j.at("atoms"), "atoms"),
                                                 get_as<std::vector<double>>(j.at("masses"), "masses"));
    }
    if (type == "piecewise_linear") {
      check_keys(j, {"type", "knots", "values"}, "piecewise_linear law");
      return std::make_shared<PiecewiseLinearCdfLaw>(get_as<std::vector<double>>(j.at("knots"), "knots"),
                                                     get_as<std::vector<double>>(j.at("values"), "values"));
    }
    if (type == "gaussian") {
      check_keys(j, {"type", "mean", "sd"}, "gaussian law");
      return std::make_shared<GaussianLaw>(decode(j.at("mean"), "mean"), decode(j.at("sd"), "sd"));
    }
    if (type == "half_normal") {
      check_keys(j, {"type", "sigma"}, "half_normal law");
      return std::make_shared<HalfNormalLaw>(decode(j.at("sigma"), "sigma"));
    }
    if (type == "empirical") {
      check_keys(j, {"type", "values"}, "empirical law");
      return std::make_shared<EmpiricalLaw>(get_as<std::vector<double>>(j.at("values"), "values"));
    }
    if (type == "mixture") {
      check_keys(j, {"type", "weights", "components"}, "mixture law");
      std::vector<LawPtr> comps;
      for (const auto& c : j.at("components")) comps.push_back(parse_law(c));
      return std::make_shared<MixtureLaw>(get_as<std::vector<double>>(j.at("weights"), "weights"), std::move(comps));
    }
  } catch (const json::out_of_range& e) {
    throw ConfigError(std::string("law is missing a field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown law type '" + type + "'");
}

json to_json(const DiagnosticReport& r) {
  return {{"alpha", r.alpha},
          {"m", r.m},
          {"epsilon", r.epsilon},
          {"p_c", r.p_c},
          {"p_d", r.p_d},
          {"mu_keep", r.mu_keep},
          {"eps_tilde", r.eps_tilde},
          {"delta_trim_plus", r.delta_trim_plus},
          {"delta_trim_minus", r.delta_trim_minus},
          {"delta_trim_two", r.delta_trim_two},
          {"d_direct_plus", r.d_direct_plus},
          {"d_mirror_plus", r.d_mirror_plus},
          {"D_Q_plus", encode_optional(r.D_Q_plus)},
          {"D_Q_minus", encode_optional(r.D_Q_minus)},
          {"dirty_contribution", r.dirty_contribution},
          {"delta_mix_plus", r.delta_mix_plus},
          {"l_mix_uses_fallback", r.l_mix_uses_fallback},
          {"exact_coverage", encode_optional(r.exact_coverage)},
          {"L_fs_at_direct", r.L_fs_at_direct},
          {"L_fs_at_mixture", r.L_fs_at_mixture},
          {"L_mix_plus", r.L_mix_plus},
          {"beta_m", r.beta_m},
          {"coverage_upper", r.coverage_upper},
          {"upper_atoms_warning", r.upper_atoms_warning},
          {"provenance", r.provenance}};
}

json to_json(const Certificate& c) {
  json inputs = json::object();
  for (const auto& [k, v] : c.inputs) inputs[k] = encode(v);
  return {{"lower_bound", c.lower_bound}, {"beta", c.beta}, {"route", to_string(c.route)}, {"inputs", inputs}};
}

json to_json(const RunResult& r) {
  json cov = json::array();
  json wid = json::array();
  for (double v : r.coverage) cov.push_back(encode(v));
  for (double v : r.width) wid.push_back(encode(v));
  return {{"spec", to_json(r.spec)},
          {"method", r.method},
          {"threshold_source", r.threshold_source},
          {"threshold", encode(r.threshold)},
          {"coverage", cov},
          {"width", wid},
          {"degenerate", r.degenerate},
          {"coverage_summary", encode_summary(r.coverage_summary)},
          {"width_summary", encode_summary(r.width_summary)},
          {"degenerate_rate", r.degenerate_rate},
          {"fallback_rate", r.fallback_rate},
          {"mean_n_keep", r.mean_n_keep},
          {"empirical_eps_tilde", r.empirical_eps_tilde},
          {"report", to_json(r.report)},
          {"cons_lb", r.cons_lb},
          {"audit_lb", encode_optional(r.audit_lb)}};
}

RunResult run_result_from_json(const json& j) {
  try {
    RunResult r;
    r.spec = parse_scene_spec(j.at("spec"));
    r.method = j.at("method").get<std::string>();
    r.threshold_source = j.at("threshold_source").get<std::string>();
    r.threshold = decode(j.at("threshold"), "threshold");
    for (const auto& v : j.at("coverage")) r.coverage.push_back(decode(v, "coverage"));
    for (const auto& v : j.at("width")) r.width.push_back(decode(v, "width"));
    r.degenerate = j.at("degenerate").get<std::vector<std::uint8_t>>();
    r.coverage_summary = decode_summary(j.at("coverage_summary"));
    r.width_summary = decode_summary(j.at("width_summary"));
    r.degenerate_rate = decode(j.at("degenerate_rate"), "degenerate_rate");
    r.fallback_rate = decode(j.at("fallback_rate"), "fallback_rate");
    r.mean_n_keep = decode(j.at("mean_n_keep"), "mean_n_keep");
    r.empirical_eps_tilde = decode(j.at("empirical_eps_tilde"), "empirical_eps_tilde");
    r.report = decode_report(j.at("report"));
    r.cons_lb = decode(j.at("cons_lb"), "cons_lb");
    r.audit_lb = decode_optional(j.at("audit_lb"));
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run result: ") + e.what());
  }
}

json results_to_json(const std::vector<RunResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return {{"schema_version", kSchemaVersion}, {"results", arr}};
}

std::vector<RunResult> results_from_json(const json& j) {
  require_object(j, "results document");
  check_keys(j, {"schema_version", "results"}, "results document");
  check_schema(j);
  if (!j.contains("results") || !j.at("results").is_array()) throw ConfigError("results document needs a 'results' array");
  std::vector<RunResult> out;
  for (const auto& r : j.at("results")) out.push_back(run_result_from_json(r));
  return out;
}

}  // namespace trimcp
