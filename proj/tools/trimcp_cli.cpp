#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trimcp/certify.hpp"
#include "trimcp/diagnostics.hpp"
#include "trimcp/errors.hpp"
#include "trimcp/harness.hpp"
#include "trimcp/numkernel.hpp"

using nlohmann::json;
using namespace trimcp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  unsigned threads = 1;
};

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

std::vector<double> read_numbers(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  std::vector<double> v;
  std::string tok;
  while (f >> tok) {
    for (char& c : tok) c = c == ',' ? ' ' : c;
    std::istringstream ss(tok);
    double x = 0.0;
    while (ss >> x) v.push_back(x);
  }
  if (v.empty()) throw ConfigError("no numbers in '" + path + "'");
  return v;
}

void write_text(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw std::runtime_error("cannot open '" + g.out + "' for writing");
  f << text;
}

void apply_seed(const Globals& g, SceneSpec& s) {
  if (g.seed) s.seed = g.seed;
  if (!s.seed) throw ConfigError("--seed is required (or set \"seed\" in the configuration)");
}

void write_results(const Globals& g, const std::vector<RunResult>& results) {
  std::ostringstream ss;
  if (parse_format(g.format) == TableFormat::json) {
    ss << results_to_json(results).dump(2) << '\n';
  } else {
    emit_tables(results, TableFormat::csv, ss);
  }
  write_text(g, ss.str());
}

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int cmd_lfs(const Globals& g, std::int64_t m, double mu, double alpha, const std::vector<double>& grid) {
  const TableFormat f = parse_format(g.format);
  std::ostringstream ss;
  json rows = json::array();
  if (f == TableFormat::csv) ss << "d,L_fs,asymptotic\n";
  for (double d : grid) {
    const double v = L_fs(m, mu, alpha, d);
    const double asym = std::max(0.0, 1.0 - alpha - d);
    if (f == TableFormat::csv) {
      ss << fmt(d, 3) << ',' << fmt(v, 4) << ',' << fmt(asym, 4) << '\n';
    } else {
      rows.push_back({{"d", d}, {"L_fs", v}, {"asymptotic", asym}});
    }
  }
  if (f == TableFormat::json) ss << json({{"m", m}, {"mu", mu}, {"alpha", alpha}, {"rows", rows}}).dump(2) << '\n';
  write_text(g, ss.str());
  return 0;
}

int cmd_diagnose(const Globals& g, const std::string& config) {
  SceneSpec spec = parse_scene_spec(read_json_file(config));
  apply_seed(g, spec);
  const GeneratedScene scene = generate_scene(spec);
  ReportOptions ro;
  ro.quad.seed = derive_seed(*spec.seed, {stream::quadrature});
  const DiagnosticReport r = build_report(scene.scene, spec.m, spec.alpha, ro);
  json out = {{"method", spec.method_label()},
              {"threshold_source", scene.threshold_source},
              {"threshold", std::isinf(scene.scene.threshold) ? json("inf") : json(scene.scene.threshold)},
              {"report", to_json(r)}};
  if (scene.stein) {
    out["stein"] = {{"mu_hat", scene.stein->mu_hat}, {"sigma_hat", scene.stein->sigma_hat}, {"bandwidth", scene.stein->bandwidth}};
  }
  write_text(g, out.dump(2) + "\n");
  return 0;
}

int cmd_exact(const Globals& g, const std::string& config) {
  const json j = read_json_file(config);
  if (!j.is_object()) throw ConfigError("exact configuration must be an object");
  for (const auto& item : j.items()) {
    static const std::vector<std::string> ok = {"schema_version", "m", "alpha", "mu", "retained", "target", "sharpness_d", "seed"};
    if (std::find(ok.begin(), ok.end(), item.key()) == ok.end()) throw ConfigError("unknown key '" + item.key() + "'");
  }
  if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion) throw ConfigError("missing or unsupported schema_version");
  if (!j.contains("m") || !j.contains("alpha") || !j.contains("mu")) throw ConfigError("exact needs m, alpha and mu");
  RetainedProfile p;
  LawPtr target;
  if (j.contains("sharpness_d")) {
    const auto pair = make_sharpness_pair(j.at("sharpness_d").get<double>());
    p.law_r = pair.first;
    target = pair.second;
  } else {
    if (!j.contains("retained") || !j.contains("target")) throw ConfigError("exact needs 'retained' and 'target' laws");
    p.law_r = parse_law(j.at("retained"));
    target = parse_law(j.at("target"));
  }
  p.mu_keep = j.at("mu").get<double>();
  p.law_p = target;
  QuadratureSpec q;
  if (g.seed) {
    q.seed = *g.seed;
  } else if (j.contains("seed")) {
    q.seed = j.at("seed").get<std::uint64_t>();
  } else if (p.law_r->kind() == LawKind::mixed) {
    throw ConfigError("--seed is required when the retained law has atoms and a continuous part");
  }
  const ExactCoverage e = exact_coverage_detailed(p, j.at("m").get<std::int64_t>(), j.at("alpha").get<double>(), *target, q);
  static const char* names[] = {"automatic", "gauss_legendre", "step_sum", "monte_carlo"};
  json out = {{"value", e.value}, {"standard_error", e.standard_error}, {"method", names[static_cast<int>(e.method)]}};
  write_text(g, out.dump(2) + "\n");
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& config) {
  const json j = read_json_file(config);
  std::vector<SceneSpec> specs;
  if (j.is_object() && j.contains("runs")) {
    for (const auto& item : j.items()) {
      if (item.key() != "runs" && item.key() != "schema_version") throw ConfigError("unknown key '" + item.key() + "'");
    }
    if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion) throw ConfigError("missing or unsupported schema_version");
    for (const auto& r : j.at("runs")) {
      json with_version = r;
      with_version["schema_version"] = kSchemaVersion;
      specs.push_back(parse_scene_spec(with_version));
    }
  } else {
    specs.push_back(parse_scene_spec(j));
  }
  std::vector<RunResult> results;
  for (auto& s : specs) {
    apply_seed(g, s);
    results.push_back(run_experiment(s, RunOptions{g.threads, 0, true}));
  }
  write_results(g, results);
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& config) {
  SweepSpec s = parse_sweep_spec(read_json_file(config));
  apply_seed(g, s.base);
  write_results(g, run_sweep(s, RunOptions{g.threads, 0, true}));
  return 0;
}

int cmd_tables(const Globals& g, const std::string& in) {
  const auto results = results_from_json(read_json_file(in));
  std::ostringstream ss;
  emit_tables(results, parse_format(g.format), ss);
  write_text(g, ss.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trimmed split-conformal diagnostics and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed (required for stochastic commands)");
  app.add_option("--out", g.out, "Output file (default: standard output)");
  app.add_option("--format", g.format, "Output format: csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", g.threads, "Worker threads for replications")->check(CLI::PositiveNumber);

  std::int64_t lfs_m = 320;
  double lfs_mu = 0.95;
  double lfs_alpha = 0.1;
  std::vector<double> lfs_grid = {0.0, 0.002, 0.005, 0.01, 0.02, 0.05};
  auto* lfs = app.add_subcommand("lfs", "Finite-sample scalar lower bound over a grid of d");
  lfs->add_option("--m", lfs_m, "Calibration size")->check(CLI::NonNegativeNumber);
  lfs->add_option("--mu", lfs_mu, "Retention probability");
  lfs->add_option("--alpha", lfs_alpha, "Miscoverage level");
  lfs->add_option("--d-grid", lfs_grid, "Loss values")->delimiter(',');

  std::string config;
  auto* diagnose = app.add_subcommand("diagnose", "Population diagnostic report for a scene");
  diagnose->add_option("--config", config, "Scene JSON")->required();
  auto* exact = app.add_subcommand("exact", "Exact coverage identity for configured laws");
  exact->add_option("--config", config, "Laws JSON")->required();
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiment");
  simulate->add_option("--config", config, "Scene JSON or {\"runs\": [...]}")->required();
  auto* sweep = app.add_subcommand("sweep", "Experiment sweep over one axis");
  sweep->add_option("--config", config, "Sweep JSON")->required();

  std::string mode;
  std::int64_t covered = 0;
  std::int64_t n_audit = 0;
  double beta = 0.05;
  std::string selected_path;
  std::string audit_path;
  std::string tau = "inf";
  double alpha = 0.1;
  ComponentBounds cb;
  auto* certify = app.add_subcommand("certify", "Certificate from audit counts, score files or component bounds");
  certify->add_option("--mode", mode, "binomial, ks or componentwise")
      ->required()
      ->check(CLI::IsMember({"binomial", "ks", "componentwise"}));
  certify->add_option("--covered", covered, "Audit points covered (binomial)");
  certify->add_option("--n", n_audit, "Audit sample size (binomial)");
  certify->add_option("--beta", beta, "Failure probability");
  certify->add_option("--selected", selected_path, "Selected scores file (ks)");
  certify->add_option("--audit", audit_path, "Audit scores file (ks)");
  certify->add_option("--tau", tau, "Cutoff tau_hat (ks)");
  certify->add_option("--alpha", alpha, "Miscoverage level (componentwise)");
  certify->add_option("--L-c", cb.L_c, "Clean retention lower bound");
  certify->add_option("--U-d", cb.U_d, "Dirty retention upper bound");
  certify->add_option("--B-delta", cb.B_delta_plus, "Clean distortion bound");
  certify->add_option("--B-Q", cb.B_Q_plus, "Retained dirty discrepancy bound");
  certify->add_option("--eps-max", cb.eps_max, "Contamination upper bound");

  std::string in_path;
  auto* tables = app.add_subcommand("tables", "Re-emit saved results as a table");
  tables->add_option("--in", in_path, "Results JSON written by simulate or sweep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*lfs) return cmd_lfs(g, lfs_m, lfs_mu, lfs_alpha, lfs_grid);
    if (*diagnose) return cmd_diagnose(g, config);
    if (*exact) return cmd_exact(g, config);
    if (*simulate) return cmd_simulate(g, config);
    if (*sweep) return cmd_sweep(g, config);
    if (*tables) return cmd_tables(g, in_path);
    if (*certify) {
      Certificate c;
      if (mode == "binomial") {
        if (!certify->count("--covered") || !certify->count("--n")) throw ConfigError("binomial mode needs --covered and --n");
        c = binomial_audit_certificate(covered, n_audit, beta);
      } else if (mode == "ks") {
        if (selected_path.empty() || audit_path.empty()) throw ConfigError("ks mode needs --selected and --audit");
        double t = 0.0;
        try {
          t = tau == "inf" ? INFINITY : std::stod(tau);
        } catch (const std::exception&) {
          throw ConfigError("--tau must be a number or 'inf'");
        }
        c = ks_audit_certificate(read_numbers(selected_path), read_numbers(audit_path), t, beta);
      } else {
        c = componentwise_certificate(alpha, cb);
      }
      write_text(g, to_json(c).dump(2) + "\n");
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
