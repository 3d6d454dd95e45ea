#pragma once

#include <array>
#include <vector>

#include "riskfield/rollout.hpp"

namespace riskfield {

/// Episode cost weights: terminal goal error, path length, accumulated soft
/// risk, and hard-contact count.
struct CostWeights {
  double w_goal = 1.0;
  double w_len = 0.1;
  double w_risk = 1.0;
  double w_hard = 10.0;

  void validate() const;
};

/// J = w_g |q_T - g|^2 + w_l sum |dq| + w_r sum r(q_t)|dq| + w_h sum 1[phi < eps].
double episode_cost(const RolloutRecord& record, const CostWeights& weights, const Vec2& goal);

/// Gradient of the episode cost over (lambda_s, lambda_h) through the
/// recorded forward sensitivities: sum_t (dJ/dq_t) . (dq_t/dtheta). The hard
/// indicator contributes zero almost everywhere.
std::array<double, 2> cost_gradient(const RolloutRecord& record, const CostWeights& weights,
                                    const Vec2& goal);

/// Detached-quantile empirical CVaR: eta is the ceil(alpha B)-th order
/// statistic (clamped into [1, B]); value = eta + mean positive excess over
/// the tail scale. The tail mask marks costs >= eta.
struct CvarResult {
  double value = 0.0;
  double eta_hat = 0.0;
  std::vector<uint8_t> tail_mask;
};

CvarResult empirical_cvar(const std::vector<double>& costs, double alpha);

/// Batch of episode costs with per-episode cost gradients over theta.
struct EpisodeBatch {
  std::vector<double> costs;
  std::vector<std::vector<double>> gradients;  // one vector per episode
  double alpha = 0.95;
};

/// Tail-gradient estimator: (1/((1-alpha)B)) sum_i grad_i 1[J_i >= eta], with
/// the quantile detached. At alpha = 0 this is the mean gradient.
std::vector<double> cvar_gradient(const EpisodeBatch& batch);

/// DKW upper-confidence radius beta = (c_max/(1-alpha)) sqrt(log(2m/delta)/(2B)).
double cvar_confidence_radius(double c_max, double alpha, size_t batch, double delta,
                              int m_channels);

/// Empirical CVaR plus the union-bound confidence radius. Costs must lie in
/// [0, c_max] or the bound is invalid.
double cvar_upper_bound(const std::vector<double>& costs, double alpha, double c_max, double delta,
                        int m_channels);

/// Projected dual ascent on the risk price: [lambda + eta (ucb - budget)]_+.
double dual_update(double lambda, double eta_rate, double ucb_cvar, double budget);

}  // namespace riskfield
