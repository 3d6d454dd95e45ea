#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskfield/energy.hpp"
#include "riskfield/gate.hpp"
#include "riskfield/patch.hpp"
#include "riskfield/scenario.hpp"

namespace riskfield {

struct PhaseState {
  Vec2 q;  // configuration [m]
  Vec2 p;  // cotangent [kg m/s]
};

enum class RolloutStatus { Reached, Timeout, LeftPatch, Stuck };

enum class GateMode {
  RouteAware,          // product-of-sigmoids affordance gate
  AlwaysOpen,          // m = 1
  GradientHeuristic,   // m = 1 when |grad r| exceeds a threshold, no feasibility test
};

struct IntegratorConfig {
  double tau = 0.05;       // step size [s]
  int horizon = 200;       // max steps
  double epsilon_hard = 0.0;  // violation threshold on phi [m]
  double goal_radius = 0.3;
  int stuck_window = 25;
  double stuck_tol = 0.05;  // minimum arc progress over the window [m]

  void validate() const;
};

struct RolloutOptions {
  GateMode gate_mode = GateMode::RouteAware;
  GateParams gate;
  double gradient_gate_threshold = 0.05;  // [1/m], GradientHeuristic only
  bool track_sensitivities = false;
  bool record_energy = false;
  bool fixed_horizon = false;  // disable early termination (gradient checks)
  double ctx_norm_clamp = std::numeric_limits<double>::infinity();
  bool project_ctx_on_axis = false;  // zero the context force off `axis`
  Vec2 axis{1.0, 0.0};
  // When set, replaces the whole force law (black-box policies).
  std::function<Vec2(const PhaseState&, const RiskPatch&, const Vec2& goal)> external_force;
};

struct StepForces {
  Vec2 geom;
  Vec2 soft;
  Vec2 hard;
};

struct GateTraceEntry {
  double m_feas = 1.0;
  int k_star = -1;
};

/// Columns hold the derivative directions (lambda_s, lambda_h).
struct SensitivityPair {
  Mat2 dq = Mat2::zero();
  Mat2 dp = Mat2::zero();
};

struct RolloutRecord {
  std::vector<PhaseState> states;      // length steps + 1
  std::vector<StepForces> forces;      // length steps
  std::vector<GateTraceEntry> gate_trace;
  std::vector<double> risk_at;         // soft risk at q_t
  std::vector<Vec2> risk_grad_at;      // grad soft risk at q_t
  std::vector<double> phi_at;          // SDF at q_t
  std::vector<uint8_t> hard_flags;     // 1[phi(q_t) < eps]
  std::vector<double> energy_before;   // per-step H with the substep-frozen gate
  std::vector<double> energy_after;
  std::vector<SensitivityPair> sens;   // per state index, when tracked

  double cum_risk = 0.0;
  int hard_count = 0;
  double arc = 0.0;
  RolloutStatus status = RolloutStatus::Timeout;
  bool left_patch = false;
  int steps = 0;

  const PhaseState& final_state() const { return states.back(); }
};

class IntegratorFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One semi-implicit step: all forces evaluated at q_t, damping on p_t,
/// position updated with p_{t+1}.
PhaseState step(const PhaseState& state, const Vec2& total_force, const FieldParams& params,
                const IntegratorConfig& config);

/// Full rollout. Events apply atomically between steps (everything with
/// t_event <= t is in effect during step t). Deterministic given all inputs.
RolloutRecord rollout(const PhaseState& start, const Vec2& goal, const RiskPatch& patch,
                      const EventSchedule& schedule, const FieldParams& params,
                      const IntegratorConfig& config, const RolloutOptions& options);

RolloutRecord rollout(const ScenarioBundle& scenario, const FieldParams& params,
                      const IntegratorConfig& config, const RolloutOptions& options);

/// Per-step position Jacobians w.r.t. (lambda_s, lambda_h); requires a record
/// produced with sensitivity tracking.
const std::vector<SensitivityPair>& rollout_sensitivities(const RolloutRecord& record);

/// Trajectory CSV: t, qx, qy, px, py, m_feas, |F_soft|, |F_hard|, risk, phi.
void export_trajectory_csv(const RolloutRecord& record, const std::string& path);

const char* status_name(RolloutStatus s);

}  // namespace riskfield
