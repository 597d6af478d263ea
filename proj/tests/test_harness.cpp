#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "trimcp/errors.hpp"
#include "trimcp/harness.hpp"

using namespace trimcp;

namespace {

SceneSpec main_spec(std::size_t reps) {
  SceneSpec s;
  s.name = "stein";
  s.reps = reps;
  s.seed = 12345;
  return s;
}

SceneSpec retention_stress(std::size_t reps) {
  SceneSpec s;
  s.name = "stress";
  s.family = SceneFamily::custom_discrete;
  s.m = 20;
  s.epsilon = 0.2;
  s.threshold = ExplicitThreshold{0.5};
  s.reps = reps;
  s.seed = 3;
  s.discrete = DiscreteSceneSpec{{{1.0, 0.0, 0.15}, {2.0, 0.0, 0.15}, {1.5, 1.0, 0.7}},
                                 {{5.0, 0.0, 0.3}, {6.0, 1.0, 0.7}}};
  return s;
}

}  // namespace

TEST_CASE("family names and spec validation") {
  for (auto f : {SceneFamily::main_heteroscedastic, SceneFamily::perfect_rejection, SceneFamily::no_separation,
                 SceneFamily::label_only, SceneFamily::separation_sweep, SceneFamily::custom_discrete}) {
    CHECK(parse_family(to_string(f)) == f);
  }
  CHECK_THROWS_AS(parse_family("bogus"), ConfigError);
  SceneSpec s = main_spec(0);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = main_spec(10);
  s.seed.reset();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = main_spec(10);
  s.epsilon = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(main_spec(1).effective_dirty_offset() == 6.0);
  CHECK(main_spec(1).effective_clean_noise().slope == doctest::Approx(0.36));
}

TEST_CASE("generated scenes carry the documented population laws") {
  const GeneratedScene g = generate_scene(main_spec(1));
  CHECK(g.threshold_source == "population");
  REQUIRE(g.stein.has_value());
  const double pc = g.scene.clean->retention(g.scene.threshold);
  CHECK(pc == doctest::Approx(0.99).epsilon(1e-10));
  CHECK(g.scene.dirty->retention(g.scene.threshold) < 1e-3);

  SceneSpec none = main_spec(1);
  none.anomaly = AnomalyKind::none;
  none.threshold = ExplicitThreshold{std::numeric_limits<double>::infinity()};
  const GeneratedScene gn = generate_scene(none);
  CHECK(std::isinf(gn.scene.threshold));
  CHECK(gn.threshold_source == "none");

  SceneSpec sep = main_spec(1);
  sep.family = SceneFamily::separation_sweep;
  sep.epsilon = 0.3;
  sep.threshold = ReferenceQuantile{0.95};
  sep.dirty_offset = 0.0;
  const RetainedProfile p0 = derive_retained_profile(generate_scene(sep).scene);
  CHECK(std::fabs(p0.p_d - p0.p_c) < 1e-12);
  sep.dirty_offset = 8.0;
  const RetainedProfile p8 = derive_retained_profile(generate_scene(sep).scene);
  CHECK(p8.p_d < 1e-6);
  CHECK(p8.eps_tilde < 1e-6);

  SceneSpec grid = main_spec(1);
  grid.threshold = ThresholdGrid{{1.0, 2.0}};
  CHECK_THROWS_AS(generate_scene(grid), ConfigError);
  SceneSpec disc = retention_stress(1);
  disc.threshold = PopulationQuantile{0.9};
  CHECK_THROWS_AS(generate_scene(disc), ConfigError);
}

TEST_CASE("runs are deterministic across thread counts") {
  SceneSpec s = main_spec(12);
  s.audit_size = 200;
  const RunResult a = run_experiment(s, {1, 0, false});
  const RunResult b = run_experiment(s, {4, 0, false});
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.coverage == b.coverage);
  REQUIRE(a.audit_lb.has_value());
}

TEST_CASE("summary interval uses 1.96 sd / sqrt(reps)") {
  const RunResult r = run_experiment(main_spec(25), {2, 0, false});
  const double mean = std::accumulate(r.coverage.begin(), r.coverage.end(), 0.0) / r.coverage.size();
  double ss = 0.0;
  for (double c : r.coverage) ss += (c - mean) * (c - mean);
  const double sd = std::sqrt(ss / (r.coverage.size() - 1));
  CHECK(r.coverage_summary.mean == doctest::Approx(mean).epsilon(1e-14));
  CHECK(r.coverage_summary.sd == doctest::Approx(sd).epsilon(1e-12));
  CHECK(r.coverage_summary.hi - r.coverage_summary.mean == doctest::Approx(1.96 * sd / 5.0).epsilon(1e-12));
  CHECK(r.width.size() == 25);
  CHECK(r.degenerate_rate == 0.0);
}

TEST_CASE("Monte Carlo test evaluation agrees with the exact CDF") {
  SceneSpec s = main_spec(20);
  const RunResult exact = run_experiment(s, {2, 0, false});
  s.n_test = 20000;
  const RunResult mc = run_experiment(s, {2, 0, false});
  for (std::size_t i = 0; i < exact.coverage.size(); ++i) {
    const double p = exact.coverage[i];
    CHECK(std::fabs(mc.coverage[i] - p) <= 3.0 * std::sqrt(p * (1 - p) / 20000.0) + 1e-12);
  }
}

TEST_CASE("degenerate rate matches the binomial tail") {
  // mu_keep = 0.8 * 0.3 + 0.2 * 0.3 = 0.3 and the cutoff is infinite when N <= 8.
  const RunResult r = run_experiment(retention_stress(4000), {4, 0, false});
  double want = 0.0;
  for (long n = 0; n <= 8; ++n) want += oracle::binom_pmf(20, n, 0.3);
  CHECK(std::fabs(r.degenerate_rate - want) <= 3.0 * std::sqrt(want * (1 - want) / 4000.0));
  CHECK(r.fallback_rate == r.degenerate_rate);
  CHECK(std::isinf(r.width_summary.mean));
}

TEST_CASE("no separation: trimming does not reduce contamination or raise coverage") {
  SceneSpec base = main_spec(40);
  base.family = SceneFamily::no_separation;
  base.threshold = PopulationQuantile{0.95};
  const RunResult trimmed = run_experiment(base, {4, 0, true});
  CHECK(trimmed.report.eps_tilde == doctest::Approx(base.epsilon).epsilon(1e-9));
  base.anomaly = AnomalyKind::none;
  base.threshold = ExplicitThreshold{std::numeric_limits<double>::infinity()};
  const RunResult plain = run_experiment(base, {4, 0, true});
  CHECK(trimmed.coverage_summary.mean <= plain.coverage_summary.hi);
}

TEST_CASE("single-point sweep equals run_experiment") {
  SweepSpec sw;
  sw.base = main_spec(8);
  sw.axis = SweepAxis::epsilon;
  sw.values = {0.2};
  const auto res = run_sweep(sw, {2, 0, false});
  REQUIRE(res.size() == 1);
  const RunResult direct = run_experiment(sw.base, {2, 0, false});
  CHECK(res[0].coverage == direct.coverage);
  CHECK(parse_axis(to_string(SweepAxis::m)) == SweepAxis::m);
  CHECK_THROWS_AS(parse_axis("nope"), ConfigError);
  sw.axis = SweepAxis::m;
  sw.values = {320.5};
  CHECK_THROWS_AS(run_sweep(sw), ConfigError);
}

TEST_CASE("scene config parsing") {
  const auto j = nlohmann::json::parse(R"({"schema_version": 1, "name": "x", "family": "main_heteroscedastic",
      "epsilon": 0.1, "m": 100, "threshold": {"kind": "explicit", "t": "inf"}, "seed": 9, "reps": 5})");
  const SceneSpec s = parse_scene_spec(j);
  CHECK(s.m == 100);
  CHECK(std::isinf(std::get<ExplicitThreshold>(s.threshold).t));
  CHECK(*s.seed == 9);
  // Round trip through JSON.
  auto back = to_json(s);
  back["schema_version"] = 1;
  CHECK(to_json(parse_scene_spec(back)).dump() == to_json(s).dump());

  auto bad = j;
  bad["unknown_key"] = 1;
  CHECK_THROWS_AS(parse_scene_spec(bad), ConfigError);
  bad = j;
  bad.erase("schema_version");
  CHECK_THROWS_AS(parse_scene_spec(bad), ConfigError);
  bad = j;
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(parse_scene_spec(bad), ConfigError);
  bad = j;
  bad["threshold"] = {{"kind", "population_quantile"}};
  CHECK_THROWS_AS(parse_scene_spec(bad), ConfigError);
  bad = j;
  bad["family"] = "mystery";
  CHECK_THROWS_AS(parse_scene_spec(bad), ConfigError);

  const LawPtr law = parse_law(nlohmann::json::parse(R"({"type": "finite", "atoms": [0, 1], "masses": [0.5, 0.5]})"));
  CHECK(law->cdf(0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(parse_law(nlohmann::json::parse(R"({"type": "weird"})")), ConfigError);
}

TEST_CASE("tables: header-only, row count, CSV and JSON agree") {
  std::ostringstream empty;
  emit_tables({}, TableFormat::csv, empty);
  std::string header;
  for (std::size_t i = 0; i < table_columns().size(); ++i) header += (i ? "," : "") + table_columns()[i];
  CHECK(empty.str() == header + "\n");

  std::vector<RunResult> rows;
  for (double q : {0.95, 0.975, 0.99}) {
    SceneSpec s = main_spec(4);
    s.threshold = PopulationQuantile{q};
    s.audit_size = 100;
    rows.push_back(run_experiment(s, {2, 0, true}));
  }
  SceneSpec plain = main_spec(4);
  plain.anomaly = AnomalyKind::none;
  plain.threshold = ExplicitThreshold{std::numeric_limits<double>::infinity()};
  rows.push_back(run_experiment(plain, {2, 0, true}));
  plain.epsilon = 0.0;
  rows.push_back(run_experiment(plain, {2, 0, true}));

  std::ostringstream csv, js;
  emit_tables(rows, TableFormat::csv, csv);
  emit_tables(rows, TableFormat::json, js);
  std::istringstream lines(csv.str());
  std::vector<std::vector<std::string>> cells;
  for (std::string line; std::getline(lines, line);) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) row.push_back(c);
    cells.push_back(row);
  }
  REQUIRE(cells.size() == 6);
  CHECK(cells[0] == table_columns());
  const auto doc = nlohmann::json::parse(js.str());
  REQUIRE(doc.at("rows").size() == 5);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(cells[r + 1] == table_row(rows[r]));
    for (std::size_t c = 0; c < table_columns().size(); ++c) {
      const auto& v = doc["rows"][r][table_columns()[c]];
      const std::string& cell = cells[r + 1][c];
      if (v.is_null()) {
        CHECK(cell == "N/A");
      } else if (v.is_string()) {
        CHECK(v.get<std::string>() == cell);
      } else {
        CHECK(v.get<double>() == doctest::Approx(std::stod(cell)).epsilon(1e-15));
      }
    }
  }
  // Retention probabilities below 1e-3 are rendered in scientific notation.
  CHECK(cells[3][7].find('e') != std::string::npos);
  CHECK(cells[4][14] == "N/A");

  // Saved results reproduce identical tables.
  const auto saved = results_from_json(results_to_json(rows));
  std::ostringstream again;
  emit_tables(saved, TableFormat::csv, again);
  CHECK(again.str() == csv.str());
  CHECK_THROWS(emit_tables(rows, TableFormat::csv, std::string("/nonexistent-dir/x.csv")));
}

TEST_CASE("diagnostic-sample certificate is a valid lower bound") {
  const GeneratedScene g = generate_scene(main_spec(1));
  const Certificate c = diagnostic_sample_certificate(g, 0.1, 2000, 0.05, 77);
  CHECK(c.lower_bound > 0.0);
  CHECK(c.lower_bound < 0.9);
  CHECK(c.inputs.count("eps_bar") == 1);
}
