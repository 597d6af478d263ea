#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "trimcp/population.hpp"
#include "trimcp/scorelaw.hpp"

namespace trimcp {

enum class Origin : std::uint8_t { clean, dirty };

// Calibration scores (A_i, S_i). Labels are simulation bookkeeping only and
// never influence the procedure.
struct CalibrationSample {
  std::vector<ScorePair> points;
  std::vector<Origin> labels;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

struct TrimOutcome {
  std::vector<std::size_t> keep_indices;
  std::size_t n_keep = 0;
  std::optional<std::size_t> r_keep;
  double tau_hat = 0.0;
  bool degenerate = true;
  // Uniform tie-breaker of the cutoff point when randomised ties are enabled.
  std::optional<double> tie_key;
};

// Optional randomised lexicographic tie-breaking: each retained point gets an
// independent uniform key and points are ordered by (A, key).
struct TieBreaking {
  bool randomize = false;
  std::uint64_t seed = 0;
};

// ceil((n + 1)(1 - alpha)), robust to rounding of the product.
std::size_t conformal_rank(std::size_t n, double alpha);

// Fixed-threshold trimmed split conformal calibration. Points with S <= t_star
// are retained and the cutoff is the r-th smallest retained A value.
TrimOutcome trim_and_calibrate(const CalibrationSample& sample, double t_star, double alpha,
                               const TieBreaking& ties = {});

struct PredictionInterval {
  double lo;
  double hi;
  double width() const { return hi - lo; }
};

// [center - tau, center + tau] for the absolute-residual score.
PredictionInterval predict_interval(double x_center, double tau_hat);

struct ExactCdf {};
struct MonteCarloCoverage {
  std::size_t n_test = 100000;
  std::uint64_t seed = 0;
};
using CoverageMode = std::variant<ExactCdf, MonteCarloCoverage>;

// Probability that a fresh target score falls under the cutoff.
double empirical_coverage(const TrimOutcome& outcome, const ScoreLaw& target, const CoverageMode& mode = ExactCdf{});

}  // namespace trimcp
