#pragma once

#include <string>
#include <utility>

#include <json.hpp>

#include "riskfield/evalsuite.hpp"
#include "riskfield/learner.hpp"
#include "riskfield/objective.hpp"
#include "riskfield/scenario.hpp"
#include "riskfield/variants.hpp"

namespace riskfield {

using Json = nlohmann::json;

// JSON round trips for the persistent value types.
Json to_json(const FieldParams& p);
FieldParams field_params_from_json(const Json& j);

Json to_json(const CoefficientHeads& h);
CoefficientHeads heads_from_json(const Json& j);

Json to_json(const ScenarioSpec& s);
ScenarioSpec scenario_spec_from_json(const Json& j);

Json to_json(const ScenarioGeometry& g);
ScenarioGeometry scenario_geometry_from_json(const Json& j);

/// Full run configuration: one tree with per-command sections. Every key has
/// a documented default; unknown keys are rejected.
struct RunConfig {
  uint64_t seed = 7;
  int workers = 0;
  std::string out_dir = "out";

  std::string scenario_regime = "DelayedEscape";  // or R1/R2/R3/balanced
  int scenario_count = 100;
  ScenarioGeometry geometry;

  IntegratorConfig integrator;
  GateParams gate;
  CostWeights weights;
  TrainConfig learner;
  EvalConfig eval;
  std::vector<std::string> variants{"GeometryOnly", "FixedCoeffCtx", "CtxExpectedCost",
                                    "RouteAwareCtxCvar"};

  bool train_fit_geometry = true;
  std::string checkpoint_dir;  // defaults to out_dir
  int theory_episodes = 20;
  std::string export_variant = "RouteAwareCtxCvar";
  uint64_t export_episode = 0;
};

Json default_run_config();
Json run_config_to_json(const RunConfig& c);

/// Parses a config tree, rejecting unknown keys anywhere in it.
RunConfig run_config_from_json(const Json& j);

/// defaults < file < overrides; both layers are validated against the
/// default tree.
RunConfig load_run_config(const std::string& config_path, const Json& overrides);

// Checkpoints bundle the geometric coefficients with the head weights.
void write_checkpoint(const std::string& path, const FieldParams& params,
                      const CoefficientHeads& heads, const std::string& variant);
std::pair<FieldParams, CoefficientHeads> read_checkpoint(const std::string& path);

/// {alpha, eta_hat, cvar, mean, tail_indices} summary.
Json batch_summary(const std::vector<double>& costs, double alpha);

Json report_to_json(const MetricReport& report);
void write_metric_report(const MetricReport& report, const std::string& dir);

Json theory_rows_to_json(const std::vector<TheoryCheckRow>& rows);

void append_training_log(const std::string& path, int epoch, const EpochDiagnostics& diag,
                         int phase, bool write_header);

}  // namespace riskfield
