#include "riskfield/rollout.hpp"

#include <algorithm>
#include <fstream>

namespace riskfield {

void IntegratorConfig::validate() const {
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (goal_radius < 0.0 || stuck_window < 1 || stuck_tol < 0.0)
    throw std::invalid_argument("bad termination parameters");
}

PhaseState step(const PhaseState& state, const Vec2& total_force, const FieldParams& params,
                const IntegratorConfig& config) {
  if (!total_force.finite()) throw IntegratorFault("non-finite force in integrator step");
  const Mat2 minv = params.mass_inv();
  PhaseState next;
  next.p = state.p + config.tau * total_force - config.tau * params.gamma * (minv * state.p);
  next.q = state.q + config.tau * (minv * next.p);
  if (!next.p.finite() || !next.q.finite()) throw IntegratorFault("non-finite state after step");
  return next;
}

namespace {

struct WorldView {
  const RiskPatch* patch = nullptr;
  RiskPatch owned;  // holds mutated patches after events
  ObstacleSet obstacles;

  void reset(const RiskPatch& base, double alpha) {
    patch = &base;
    obstacles = ObstacleSet::from_patch(base, alpha);
  }
  void mutate(const RiskPatch& base, const EventSchedule& schedule, int t, double alpha) {
    owned = apply_events(base, schedule, t);
    patch = &owned;
    obstacles = ObstacleSet::from_patch(owned, alpha);
  }
};

}  // namespace

RolloutRecord rollout(const PhaseState& start, const Vec2& goal, const RiskPatch& patch,
                      const EventSchedule& schedule, const FieldParams& params,
                      const IntegratorConfig& config, const RolloutOptions& options) {
  config.validate();
  params.validate();

  RolloutRecord rec;
  rec.states.push_back(start);
  if (options.track_sensitivities) rec.sens.push_back(SensitivityPair{});

  WorldView world;
  world.reset(patch, params.alpha);
  size_t next_event = 0;
  std::vector<const PatchMutation*> pending;
  for (const PatchMutation& m : schedule.events) pending.push_back(&m);

  const Mat2 minv = params.mass_inv();
  std::vector<double> arc_history;
  arc_history.reserve(config.horizon + 1);
  arc_history.push_back(0.0);

  if ((start.q - goal).norm() <= config.goal_radius && !options.fixed_horizon) {
    rec.status = RolloutStatus::Reached;
    return rec;
  }

  rec.status = RolloutStatus::Timeout;
  for (int t = 0; t < config.horizon; ++t) {
    // World changes happen between steps.
    while (next_event < pending.size() && pending[next_event]->t_event <= t) {
      world.mutate(patch, schedule, t, params.alpha);
      while (next_event < pending.size() && pending[next_event]->t_event <= t) ++next_event;
    }
    const RiskPatch& cur = *world.patch;
    const PhaseState& x = rec.states.back();

    const FieldSample risk = cur.sample(x.q, Field::SoftRisk);
    const FieldSample phi = cur.sample(x.q, Field::Sdf);
    if (risk.clamped) {
      rec.left_patch = true;
      rec.status = RolloutStatus::LeftPatch;
      break;
    }
    rec.risk_at.push_back(risk.value);
    rec.risk_grad_at.push_back(risk.grad);
    rec.phi_at.push_back(phi.value);
    rec.hard_flags.push_back(phi.value < config.epsilon_hard ? 1 : 0);

    StepForces forces;
    GateTraceEntry trace;
    Vec2 total;
    double gate_m = 1.0;
    Vec2 gate_dq{0.0, 0.0};

    if (options.external_force) {
      total = options.external_force(x, cur, goal);
      forces.geom = total;
    } else {
      forces.geom = geometry_force(x.q, params, goal, world.obstacles);
      switch (options.gate_mode) {
        case GateMode::RouteAware: {
          Vec2 geo_dir = forces.geom.normalized();
          if (geo_dir.norm2() < 0.5) geo_dir = (goal - x.q).normalized();
          const GateEvaluation ev = evaluate_gate_at(x.q, goal, geo_dir, cur, options.gate,
                                                     options.track_sensitivities);
          gate_m = ev.result.m_feas;
          gate_dq = ev.dm_dq;
          trace.m_feas = gate_m;
          trace.k_star = ev.result.k_star;
          break;
        }
        case GateMode::AlwaysOpen:
          gate_m = 1.0;
          trace.m_feas = 1.0;
          break;
        case GateMode::GradientHeuristic:
          gate_m = risk.grad.norm() > options.gradient_gate_threshold ? 1.0 : 0.0;
          trace.m_feas = gate_m;
          break;
      }
      const ContextForce ctx = context_force(x.q, cur, params, gate_m);
      forces.soft = ctx.soft;
      forces.hard = ctx.hard;

      Vec2 fctx = forces.soft + forces.hard;
      if (options.project_ctx_on_axis) {
        const Vec2 a = options.axis.normalized();
        fctx = a * a.dot(fctx);
        forces.soft = fctx;  // decomposition is not meaningful under projection
        forces.hard = {0.0, 0.0};
      }
      const double n = fctx.norm();
      if (n > options.ctx_norm_clamp) {
        fctx = fctx * (options.ctx_norm_clamp / n);
        forces.soft = fctx;
        forces.hard = {0.0, 0.0};
      }
      total = forces.geom + fctx;
    }

    double h_before = 0.0;
    if (options.record_energy)
      h_before = hamiltonian_total(x.q, x.p, cur, params, goal, world.obstacles, gate_m);

    const PhaseState next = step(x, total, params, config);

    if (options.track_sensitivities && !options.external_force) {
      // Forward-mode recursion through the exact step equations. Columns are
      // the (lambda_s, lambda_h) directions; the gate is a smooth function of
      // position with its candidate selection frozen.
      const SensitivityPair& s = rec.sens.back();
      const Mat2 jac_geom = geometry_force_jacobian(x.q, params, goal, world.obstacles);
      const Mat2 hess_risk{0.0, risk.hess_xy, risk.hess_xy, 0.0};
      const Mat2 hess_phi{0.0, phi.hess_xy, phi.hess_xy, 0.0};
      const SoftplusBarrier bsp = softplus_barrier(phi.value, params.k_sharp, params.d_hat_phi);

      Mat2 jac = jac_geom;
      jac += -params.lambda_s * (gate_m * hess_risk + Mat2::outer(risk.grad, gate_dq));
      jac += -params.lambda_h * (bsp.deriv2 * Mat2::outer(phi.grad, phi.grad) + bsp.deriv * hess_phi);

      // Direct force derivatives w.r.t. the coefficients.
      const Vec2 df_dls = -gate_m * risk.grad;
      const Vec2 df_dlh = -bsp.deriv * phi.grad;
      const Mat2 direct{df_dls.x, df_dlh.x, df_dls.y, df_dlh.y};

      SensitivityPair ns;
      ns.dp = s.dp + config.tau * (jac.matmul(s.dq) + direct) -
              (config.tau * params.gamma) * minv.matmul(s.dp);
      ns.dq = s.dq + config.tau * minv.matmul(ns.dp);
      rec.sens.push_back(ns);
    } else if (options.track_sensitivities) {
      rec.sens.push_back(rec.sens.back());
    }

    if (options.record_energy) {
      rec.energy_before.push_back(h_before);
      rec.energy_after.push_back(
          hamiltonian_total(next.q, next.p, cur, params, goal, world.obstacles, gate_m));
    }

    const double ds = (next.q - x.q).norm();
    rec.cum_risk += risk.value * ds;
    rec.hard_count += rec.hard_flags.back();
    rec.arc += ds;
    arc_history.push_back(rec.arc);

    rec.forces.push_back(forces);
    rec.gate_trace.push_back(trace);
    rec.states.push_back(next);
    rec.steps = t + 1;

    if (!cur.interior(next.q)) {
      rec.left_patch = true;
      rec.status = RolloutStatus::LeftPatch;
      break;
    }
    if (options.fixed_horizon) continue;
    if ((next.q - goal).norm() <= config.goal_radius) {
      rec.status = RolloutStatus::Reached;
      break;
    }
    if (t + 1 >= config.stuck_window &&
        rec.arc - arc_history[t + 1 - config.stuck_window] < config.stuck_tol) {
      rec.status = RolloutStatus::Stuck;
      break;
    }
  }
  return rec;
}

RolloutRecord rollout(const ScenarioBundle& scenario, const FieldParams& params,
                      const IntegratorConfig& config, const RolloutOptions& options) {
  PhaseState start;
  start.q = scenario.spec.start;
  start.p = {0.0, 0.0};
  return rollout(start, scenario.spec.goal, scenario.patch, scenario.schedule, params, config,
                 options);
}

const std::vector<SensitivityPair>& rollout_sensitivities(const RolloutRecord& record) {
  if (record.sens.size() != record.states.size())
    throw std::logic_error("rollout was not run with sensitivity tracking");
  return record.sens;
}

void export_trajectory_csv(const RolloutRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,qx,qy,px,py,m_feas,f_soft,f_hard,risk,phi\n";
  for (int t = 0; t < record.steps; ++t) {
    const PhaseState& x = record.states[t];
    out << t << ',' << x.q.x << ',' << x.q.y << ',' << x.p.x << ',' << x.p.y << ','
        << record.gate_trace[t].m_feas << ',' << record.forces[t].soft.norm() << ','
        << record.forces[t].hard.norm() << ',' << record.risk_at[t] << ',' << record.phi_at[t]
        << '\n';
  }
}

const char* status_name(RolloutStatus s) {
  switch (s) {
    case RolloutStatus::Reached: return "reached";
    case RolloutStatus::Timeout: return "timeout";
    case RolloutStatus::LeftPatch: return "left_patch";
    case RolloutStatus::Stuck: return "stuck";
  }
  return "?";
}

}  // namespace riskfield
