#include "riskfield/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskfield {

void CostWeights::validate() const {
  if (w_goal < 0.0 || w_len < 0.0 || w_risk < 0.0 || w_hard < 0.0)
    throw std::invalid_argument("cost weights must be nonnegative");
}

double episode_cost(const RolloutRecord& record, const CostWeights& weights, const Vec2& goal) {
  const Vec2 err = record.final_state().q - goal;
  return weights.w_goal * err.norm2() + weights.w_len * record.arc +
         weights.w_risk * record.cum_risk + weights.w_hard * record.hard_count;
}

std::array<double, 2> cost_gradient(const RolloutRecord& record, const CostWeights& weights,
                                    const Vec2& goal) {
  const std::vector<SensitivityPair>& sens = rollout_sensitivities(record);
  const int T = record.steps;

  // dJ/dq_t assembled per state, then contracted against dq_t/dtheta.
  std::vector<Vec2> djdq(T + 1, Vec2{0.0, 0.0});
  djdq[T] += 2.0 * weights.w_goal * (record.states[T].q - goal);
  for (int t = 0; t < T; ++t) {
    const Vec2 delta = record.states[t + 1].q - record.states[t].q;
    const double len = delta.norm();
    const Vec2 u = len > 1e-12 ? delta / len : Vec2{0.0, 0.0};
    // Path-length term.
    djdq[t] -= weights.w_len * u;
    djdq[t + 1] += weights.w_len * u;
    // Risk exposure r(q_t) |dq_t|.
    djdq[t] += weights.w_risk * (record.risk_grad_at[t] * len - record.risk_at[t] * u);
    djdq[t + 1] += weights.w_risk * record.risk_at[t] * u;
  }

  std::array<double, 2> grad{0.0, 0.0};
  for (int t = 0; t <= T; ++t) {
    const Mat2& dq = sens[t].dq;
    grad[0] += djdq[t].x * dq.a + djdq[t].y * dq.c;
    grad[1] += djdq[t].x * dq.b + djdq[t].y * dq.d;
  }
  return grad;
}

CvarResult empirical_cvar(const std::vector<double>& costs, double alpha) {
  if (costs.empty()) throw std::invalid_argument("empirical_cvar: empty batch");
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("alpha must lie in [0, 1)");
  const size_t B = costs.size();

  std::vector<double> sorted(costs);
  std::sort(sorted.begin(), sorted.end());
  size_t rank = static_cast<size_t>(std::ceil(alpha * static_cast<double>(B)));
  rank = std::clamp<size_t>(rank, 1, B);

  CvarResult res;
  res.eta_hat = sorted[rank - 1];
  double excess = 0.0;
  res.tail_mask.resize(B);
  for (size_t i = 0; i < B; ++i) {
    excess += std::max(costs[i] - res.eta_hat, 0.0);
    res.tail_mask[i] = costs[i] >= res.eta_hat ? 1 : 0;
  }
  res.value = res.eta_hat + excess / ((1.0 - alpha) * static_cast<double>(B));
  return res;
}

std::vector<double> cvar_gradient(const EpisodeBatch& batch) {
  if (batch.costs.empty()) throw std::invalid_argument("cvar_gradient: empty batch");
  if (batch.gradients.size() != batch.costs.size())
    throw std::invalid_argument("cvar_gradient: gradient/cost size mismatch");
  const CvarResult cvar = empirical_cvar(batch.costs, batch.alpha);

  const size_t dim = batch.gradients.front().size();
  std::vector<double> grad(dim, 0.0);
  const double scale = 1.0 / ((1.0 - batch.alpha) * static_cast<double>(batch.costs.size()));
  for (size_t i = 0; i < batch.costs.size(); ++i) {
    if (!cvar.tail_mask[i]) continue;
    if (batch.gradients[i].size() != dim)
      throw std::invalid_argument("cvar_gradient: inconsistent gradient dimension");
    for (size_t k = 0; k < dim; ++k) grad[k] += scale * batch.gradients[i][k];
  }
  return grad;
}

double cvar_confidence_radius(double c_max, double alpha, size_t batch, double delta,
                              int m_channels) {
  if (batch == 0) throw std::invalid_argument("confidence radius needs a nonempty batch");
  if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta must lie in (0, 1)");
  if (m_channels < 1) throw std::invalid_argument("m_channels must be at least 1");
  return c_max / (1.0 - alpha) *
         std::sqrt(std::log(2.0 * m_channels / delta) / (2.0 * static_cast<double>(batch)));
}

double cvar_upper_bound(const std::vector<double>& costs, double alpha, double c_max, double delta,
                        int m_channels) {
  for (double c : costs) {
    if (c < 0.0 || c > c_max)
      throw std::invalid_argument("cvar_upper_bound: cost outside [0, c_max], bound invalid");
  }
  const CvarResult cvar = empirical_cvar(costs, alpha);
  return cvar.value + cvar_confidence_radius(c_max, alpha, costs.size(), delta, m_channels);
}

double dual_update(double lambda, double eta_rate, double ucb_cvar, double budget) {
  if (lambda < 0.0) throw std::invalid_argument("dual variable must be nonnegative");
  return std::max(0.0, lambda + eta_rate * (ucb_cvar - budget));
}

}  // namespace riskfield
