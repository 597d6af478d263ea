#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trimcp/rng.hpp"
#include "trimcp/scorelaw.hpp"

namespace trimcp {

// A nonconformity score A paired with an anomaly score S.
struct ScorePair {
  double a;
  double s;
};

// An anomaly score that depends on the covariate only. retained_region(t)
// returns the covariate set {x : S(x) <= t} as a union of closed intervals.
class CovariateScore {
 public:
  virtual ~CovariateScore() = default;
  virtual double operator()(double x) const = 0;
  virtual std::vector<CovariateInterval> retained_region(double t) const = 0;
  virtual std::string name() const = 0;
};

// Assigns S = 0 to every point, so any threshold t >= 0 keeps everything.
class ConstantCovariateScore final : public CovariateScore {
 public:
  double operator()(double) const override { return 0.0; }
  std::vector<CovariateInterval> retained_region(double t) const override;
  std::string name() const override { return "none"; }
};

// One mixture component (the clean law P or the dirty law Q) together with
// the scores A and S it induces.
class ScoredComponent {
 public:
  virtual ~ScoredComponent() = default;
  // Consumes a fixed number of generator outputs per call, so components that
  // share a stream stay aligned.
  virtual ScorePair draw(Rng& rng) const = 0;
  // P(S <= t).
  virtual double retention(double t) const = 0;
  // Law of A.
  virtual LawPtr score_law() const = 0;
  // Law of A given S <= t; nullptr when retention(t) == 0.
  virtual LawPtr kept_law(double t) const = 0;
  // Law of A given S > t; nullptr when retention(t) == 1.
  virtual LawPtr dropped_law(double t) const = 0;
  // P(A <= a, S <= t).
  virtual double joint_cdf(double a, double t) const = 0;
  virtual std::string name() const = 0;
};

using ComponentPtr = std::shared_ptr<const ScoredComponent>;

// Response model Y = intercept + slope * X + (noise_base + noise_slope * |X|) * xi.
struct ResponseModel {
  double intercept = 0.0;
  double slope = 1.0;
  double noise_base = 1.0;
  double noise_slope = 0.0;
};

// Point predictor f(x) = intercept + slope * x.
struct LinearBackbone {
  double intercept = 0.0;
  double slope = 1.0;
};

// X ~ N(mean, sd), Y from a response model, A = |Y - f(X)|, S = score(X).
class RegressionComponent final : public ScoredComponent {
 public:
  RegressionComponent(std::string label, GaussianCovariate x, ResponseModel y, LinearBackbone f,
                       std::shared_ptr<const CovariateScore> score);
  ScorePair draw(Rng& rng) const override;
  double retention(double t) const override;
  LawPtr score_law() const override { return full_; }
  LawPtr kept_law(double t) const override;
  LawPtr dropped_law(double t) const override;
  double joint_cdf(double a, double t) const override;
  std::string name() const override { return label_; }

  // Draws (x, y) using the same two normals as draw().
  std::pair<double, double> draw_xy(Rng& rng) const;
  const GaussianCovariate& covariate() const { return x_; }
  const ResponseModel& response() const { return y_; }
  const LinearBackbone& backbone() const { return f_; }
  const CovariateScore& score() const { return *score_; }

 private:
  ResidualModel residual() const;
  std::vector<CovariateInterval> complement(const std::vector<CovariateInterval>& region) const;

  std::string label_;
  GaussianCovariate x_;
  ResponseModel y_;
  LinearBackbone f_;
  std::shared_ptr<const CovariateScore> score_;
  LawPtr full_;
};

struct JointAtom {
  double a;
  double s;
  double mass;
};

// Finite joint law of (A, S).
class DiscreteComponent final : public ScoredComponent {
 public:
  explicit DiscreteComponent(std::vector<JointAtom> atoms, std::string label = "discrete");
  ScorePair draw(Rng& rng) const override;
  double retention(double t) const override;
  LawPtr score_law() const override { return full_; }
  LawPtr kept_law(double t) const override;
  LawPtr dropped_law(double t) const override;
  double joint_cdf(double a, double t) const override;
  std::string name() const override { return label_; }
  const std::vector<JointAtom>& atoms() const { return atoms_; }

 private:
  LawPtr restricted(bool keep, double t) const;

  std::vector<JointAtom> atoms_;
  std::vector<double> cumulative_;
  std::string label_;
  LawPtr full_;
};

struct ContaminationScene {
  ComponentPtr clean;
  ComponentPtr dirty;
  double epsilon = 0.0;
  double threshold = 0.0;  // t*, +infinity means no trimming

  void validate() const;
};

// Draws one calibration point from (1 - eps) P + eps Q; `dirty` reports the
// latent label.
ScorePair draw_contaminated(const ContaminationScene& scene, Rng& rng, bool& dirty);

struct AnalyticProfile {};
struct MonteCarloProfile {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};
using ProfileMode = std::variant<AnalyticProfile, MonteCarloProfile>;

struct ProfileProvenance {
  bool analytic = true;
  std::size_t samples = 0;
  double se_p_c = 0.0;
  double se_p_d = 0.0;
  // One-sided DKW radius at level 0.05 for the retention estimates.
  double dkw_p_c = 0.0;
  double dkw_p_d = 0.0;
  std::size_t dirty_kept_draws = 0;
};

struct RetainedProfile {
  double epsilon = 0.0;
  double p_c = 1.0;
  double p_d = 1.0;
  double mu_keep = 1.0;
  double eps_tilde = 0.0;
  LawPtr law_r;       // retained law of A
  LawPtr law_p_keep;  // absent when p_c == 0
  LawPtr law_q_keep;  // absent when p_d == 0
  LawPtr law_p;       // clean target law of A
  LawPtr law_q;       // dirty law of A
  LawPtr law_p_drop;  // clean law of A given S > t*; absent when p_c == 1
  // False when the retained dirty law rests on fewer than 500 draws.
  bool q_keep_reliable = true;
  ProfileProvenance provenance;
};

// Minimum number of retained dirty draws for a sampled D_Q to be reported.
inline constexpr std::size_t kMinRetainedDirtyDraws = 500;

RetainedProfile derive_retained_profile(const ContaminationScene& scene, const ProfileMode& mode = AnalyticProfile{});

// (1 - eps_tilde) * Delta_trim,+ + eps_tilde * D_Q,+ ; the dirty term is zero
// when p_d == 0 and uses the worst case D_Q,+ = 1 when Q_keep is unreliable.
double mixture_upper_bound(const RetainedProfile& profile, const GapGrid& grid = {});

}  // namespace trimcp
