#pragma once

#include <functional>
#include <vector>

#include "riskfield/objective.hpp"
#include "riskfield/rollout.hpp"
#include "riskfield/scenario.hpp"

namespace riskfield {

struct TrainConfig {
  int batch = 64;
  double alpha = 0.95;
  double lr = 0.05;
  double grad_clip = 5.0;
  int epochs = 200;
  double head_init_logit = -4.0;  // near-zero coefficient output at start
  double frac_delayed = 0.7;      // scenario mixture
  double frac_r1 = 0.15;
  double frac_r2 = 0.15;
  double eta_tol = 0.05;  // curriculum violation tolerance
  int window = 5;         // curriculum window W
  int workers = 0;        // 0 = hardware concurrency
  uint64_t seed = 0;

  void validate() const;
};

struct TrainState {
  TrainConfig config;
  FieldParams params;  // geometric heads frozen; lambda comes from the heads
  CoefficientHeads heads;
  IntegratorConfig integrator;
  CostWeights weights;
  GateParams gate;
  GateMode gate_mode = GateMode::RouteAware;
  ScenarioGeometry geometry;
  int epoch = 0;
  int phase = 0;
  uint64_t episode_counter = 0;
  std::vector<double> violation_history;  // one entry per epoch

  static TrainState init(const TrainConfig& config, const FieldParams& geometry_checkpoint,
                         const ScenarioGeometry& geometry);
};

struct EpochDiagnostics {
  double cvar = 0.0;
  double mean_cost = 0.0;
  int tail_size = 0;
  double grad_norm_pre = 0.0;
  double grad_norm_post = 0.0;
  double lambda_s_mean = 0.0;
  double lambda_h_mean = 0.0;
  double violation_rate = 0.0;
  double success_rate = 0.0;
  bool stepped = true;  // false when a non-finite gradient was skipped
};

using ScenarioSampler = std::function<ScenarioBundle(uint64_t episode_index)>;

/// Sampler drawing from the configured regime mixture, deterministic in
/// (seed, episode index).
ScenarioSampler mixture_sampler(const TrainState& state);

/// One episode-loop update: B rollouts with sensitivities, detached-quantile
/// CVaR over episode costs, tail gradient chained to the head weights,
/// norm-clipped gradient step.
EpochDiagnostics episode_update(TrainState& state, const ScenarioSampler& sampler, int batch,
                                double alpha);

/// Rank-1 secant Gauss-Newton corrector for the within-episode loop.
struct SegmentCorrector {
  std::vector<std::vector<double>> j_hat;  // y_dim x z_dim
  double mu = 0.9;   // forgetting factor
  double rho = 1.0;  // damping

  static SegmentCorrector identity(int y_dim, int z_dim, double mu, double rho);
};

/// Secant update J <- mu J + (1-mu) dy dz^T / |dz|^2 followed by the damped
/// least-squares step (J^T J + rho I)^-1 J^T (y_tgt - y). A zero coefficient
/// change skips the secant update and reuses the previous Jacobian.
std::vector<double> segment_correct(SegmentCorrector& corrector, const std::vector<double>& delta_y,
                                    const std::vector<double>& delta_zeta,
                                    const std::vector<double>& y_target,
                                    const std::vector<double>& y);

/// Projects corrected coefficients to the nonnegative orthant.
std::vector<double> project_nonnegative(std::vector<double> zeta);

/// True iff all of the last W validation violation rates are strictly below
/// eta_tol. Requires at least W entries.
bool curriculum_check(const std::vector<double>& violation_history, double eta_tol, int window);

/// Applies the curriculum: on advance, raises the scenario difficulty.
bool curriculum_advance(TrainState& state);

/// Smallest eigenvalue of the barrier-dictionary Gram matrix
/// E[G_B^T G_B] over the states visited by the rollouts; a training
/// diagnostic for coefficient identifiability.
double gram_excitation_check(const std::vector<RolloutRecord>& rollouts,
                             const ObstacleSet& obstacles, double d_hat);

/// Grid search for (beta, gamma) on risk-free patches: the geometry-only
/// checkpoint fit.
FieldParams fit_geometry_checkpoint(const FieldParams& base, const ScenarioGeometry& geometry,
                                    const IntegratorConfig& integrator, const CostWeights& weights,
                                    uint64_t seed, int episodes = 8);

}  // namespace riskfield
