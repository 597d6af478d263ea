#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trimcp/anomaly.hpp"
#include "trimcp/certify.hpp"
#include "trimcp/diagnostics.hpp"
#include "trimcp/population.hpp"

namespace trimcp {

enum class SceneFamily {
  main_heteroscedastic,
  perfect_rejection,
  no_separation,
  label_only,
  separation_sweep,
  custom_discrete
};
enum class AnomalyKind { none, stein, mahalanobis };
enum class BackboneMode { oracle, fitted };

std::string to_string(SceneFamily f);
std::string to_string(AnomalyKind a);
std::string to_string(BackboneMode b);
SceneFamily parse_family(const std::string& s);

struct DiscreteSceneSpec {
  std::vector<JointAtom> clean;
  std::vector<JointAtom> dirty;
};

struct CleanNoise {
  double base = 0.6;
  double slope = 0.36;
};

// One experiment configuration. Optional fields fall back to the family
// defaults listed in README.md.
struct SceneSpec {
  std::string name;
  SceneFamily family = SceneFamily::main_heteroscedastic;
  double epsilon = 0.2;
  std::int64_t m = 320;
  double alpha = 0.1;
  AnomalyKind anomaly = AnomalyKind::stein;
  ThresholdPolicy threshold = PopulationQuantile{0.99};
  std::size_t reps = 100;
  std::size_t n_test = 0;  // 0 evaluates coverage with the exact clean CDF
  std::optional<std::uint64_t> seed;
  BackboneMode backbone = BackboneMode::oracle;
  std::optional<CleanNoise> clean_noise;
  std::optional<double> dirty_offset;
  double label_offset = 8.0;
  std::size_t fit_size = 500;
  std::size_t reference_size = 256;
  std::size_t diagnostic_size = 0;  // 0 means m
  std::size_t audit_size = 0;       // 0 disables the audit certificate
  std::optional<DiscreteSceneSpec> discrete;

  void validate() const;
  CleanNoise effective_clean_noise() const;
  double effective_dirty_offset() const;
  std::string method_label() const;
};

// The fixed population objects behind a SceneSpec: components, fitted
// auxiliary quantities and the resolved threshold.
struct GeneratedScene {
  ContaminationScene scene;
  std::string threshold_source;
  std::optional<SteinScoreConfig> stein;
  LinearBackbone backbone;
  std::shared_ptr<const CovariateScore> score;
};

GeneratedScene generate_scene(const SceneSpec& spec);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;  // mean -/+ 1.96 sd / sqrt(reps)
  double hi = 0.0;
};

struct RunResult {
  SceneSpec spec;
  std::string method;
  std::string threshold_source;
  double threshold = 0.0;
  std::vector<double> coverage;
  std::vector<double> width;
  std::vector<std::uint8_t> degenerate;
  Summary coverage_summary;
  Summary width_summary;  // mean is +infinity when any replication is degenerate
  double degenerate_rate = 0.0;
  double fallback_rate = 0.0;
  double mean_n_keep = 0.0;
  double empirical_eps_tilde = 0.0;  // retained dirty share pooled over reps
  DiagnosticReport report;
  double cons_lb = 0.0;
  std::optional<double> audit_lb;
};

struct RunOptions {
  unsigned threads = 1;
  std::uint64_t grid_index = 0;
  bool with_report = true;
};

RunResult run_experiment(const SceneSpec& spec, const RunOptions& options = {});

enum class SweepAxis { dirty_offset, m, q, epsilon };
SweepAxis parse_axis(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepSpec {
  SceneSpec base;
  SweepAxis axis = SweepAxis::dirty_offset;
  std::vector<double> values;
};

std::vector<RunResult> run_sweep(const SweepSpec& sweep, const RunOptions& options = {});

// Conservative componentwise certificate built from independent clean and
// dirty diagnostic samples; the budget beta is split over four bounds.
Certificate diagnostic_sample_certificate(const GeneratedScene& g, double alpha, std::size_t n_diag, double beta,
                                          std::uint64_t seed);

// JSON configuration (schema_version 1). Unknown keys raise ConfigError.
inline constexpr int kSchemaVersion = 1;
SceneSpec parse_scene_spec(const nlohmann::json& j);
nlohmann::json to_json(const SceneSpec& spec);
SweepSpec parse_sweep_spec(const nlohmann::json& j);
LawPtr parse_law(const nlohmann::json& j);

nlohmann::json to_json(const DiagnosticReport& r);
nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const RunResult& r);
RunResult run_result_from_json(const nlohmann::json& j);
nlohmann::json results_to_json(const std::vector<RunResult>& results);
std::vector<RunResult> results_from_json(const nlohmann::json& j);

enum class TableFormat { csv, json };
TableFormat parse_format(const std::string& s);

// Column order of emitted tables.
const std::vector<std::string>& table_columns();
// Formatted cells of one row, in table_columns() order.
std::vector<std::string> table_row(const RunResult& r);
void emit_tables(const std::vector<RunResult>& results, TableFormat format, std::ostream& out);
void emit_tables(const std::vector<RunResult>& results, TableFormat format, const std::string& path);

}  // namespace trimcp
