#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskfield/objective.hpp"
#include "riskfield/variants.hpp"

namespace riskfield {

/// One labeled force observation for the spatial selectivity metrics.
struct SpatialSample {
  bool is_r1 = false;   // R1 positive class, R2 negative
  Vec2 f_ctx;           // context force at the evaluation state
  Vec2 d_safe;          // known safer direction (R1 only)
  Vec2 lateral_dir;     // unit normal to the geometry-only direction
};

struct SpatialMetrics {
  double car = 0.0;
  double far = 0.0;
  double sr = 0.0;  // mean lateral force R1 / R2; 0 when both vanish
  bool sr_infinite = false;
  double auprc = 0.0;
  double epsilon_act = 0.0;
  double mean_lateral_r1 = 0.0;
  double mean_lateral_r2 = 0.0;
};

/// CAR/FAR over the activation threshold, the mean-force ratio, and AUPRC
/// over the activation score with R1 as positives. When epsilon_act < 0 the
/// threshold defaults to 5% of the batch-median nonzero lateral force.
SpatialMetrics spatial_selectivity(const std::vector<SpatialSample>& samples,
                                   double epsilon_act = -1.0);

/// Paired temporal episode: the variant's rollout, the geometry-only rollout
/// on the identical world, and the event step.
struct TemporalEpisode {
  const RolloutRecord* enriched = nullptr;
  const RolloutRecord* geometry = nullptr;
  int t_escape = 0;
};

struct TemporalMetrics {
  double false_pre_activation = 0.0;
  double suppress_rate = 1.0;  // 1 - false pre-activation, by definition
  double mean_reaction_delay = 0.0;
  int delay_sentinel_count = 0;  // episodes that never reacted before horizon
  double mean_stale_exposure = 0.0;
};

/// Lateral deviation of a paired pair at one step: the displacement projected
/// onto the normal of the geometry-only velocity at the same step index.
double lateral_deviation(const RolloutRecord& enriched, const RolloutRecord& geometry, int t);

TemporalMetrics temporal_selectivity(const std::vector<TemporalEpisode>& episodes, double delta,
                                     int horizon);

struct OutcomeMetrics {
  double success = 0.0;
  double violation_cvar = 0.0;
  double mean_oscillation = 0.0;
  double mean_path_ratio = 0.0;
};

/// Post-event violation cost of one episode: risk exposure plus separately
/// weighted hard contacts from the event step to termination.
double post_event_violation_cost(const RolloutRecord& record, int t_event, double w_risk,
                                 double w_hard);

OutcomeMetrics outcome_metrics(const std::vector<TemporalEpisode>& episodes, double alpha,
                               double w_risk, double w_hard_violation,
                               double oscillation_threshold_deg = 30.0);

/// Percentile bootstrap CI over per-episode statistics; deterministic for a
/// fixed seed.
struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};
ConfidenceInterval bootstrap_ci(const std::vector<double>& values, int n_boot, uint64_t seed,
                                double coverage = 0.95);

struct EvalConfig {
  int episodes = 100;       // paired delayed-escape episodes
  int static_r1 = 150;      // static selectivity suite sizes
  int static_r2 = 150;
  double delta = 0.15;      // reaction threshold [m]
  std::vector<double> delta_sweep{0.10, 0.15, 0.20};
  double alpha = 0.95;      // violation CVaR level
  double w_risk = 1.0;
  double w_hard_violation = 10.0;
  int n_boot = 200;
  uint64_t seed = 7;
  int workers = 0;
};

struct VariantReport {
  std::string name;
  TemporalMetrics temporal;
  OutcomeMetrics outcome;
  SpatialMetrics spatial;
  std::map<std::string, ConfidenceInterval> ci;
  std::map<std::string, double> delta_sensitivity;  // false pre-activation per delta
};

struct MetricReport {
  std::vector<VariantReport> variants;
  EvalConfig config;
};

/// Paired evaluation: every variant's episode i uses the identical world as
/// every other variant's episode i, with the geometry-only rollout as the
/// shared baseline.
MetricReport run_benchmark(const std::vector<Policy>& policies, const ScenarioGeometry& geometry,
                           const IntegratorConfig& integrator, const GateParams& gate,
                           const EvalConfig& config);

/// One row of the empirical theory-check table.
struct TheoryCheckRow {
  std::string name;
  std::string statistic;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct TheoryConfig {
  ScenarioGeometry geometry;
  IntegratorConfig integrator;
  GateParams gate;
  FieldParams params;  // geometry checkpoint; context coefficients set per check
  uint64_t seed = 7;
  int episodes = 20;
  double delta = 0.15;
};

/// C1 exactness, C2 suppression on R2, C3 one-step risk deflection,
/// discrete dissipativity across the step-size sweep, preservation scaling
/// under context clamping, no-hallucination under lateral projection, and
/// the gate boundary value.
std::vector<TheoryCheckRow> theory_check_suite(const TheoryConfig& config);

}  // namespace riskfield
