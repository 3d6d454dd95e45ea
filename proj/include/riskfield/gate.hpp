#pragma once

#include <vector>

#include "riskfield/energy.hpp"
#include "riskfield/geom.hpp"
#include "riskfield/patch.hpp"

namespace riskfield {

/// Route-aware gate constants. The sigmoid sharpnesses and thresholds are
/// fixed across all experiments.
struct GateParams {
  int primitive_count = 8;    // K
  double delta_phi = 0.15;    // clearance threshold [m]
  double rho_risk = 0.05;     // risk-improvement margin
  double kappa_risk = 10.0;   // margin sigmoid sharpness
  double kappa_clear = 20.0;  // clearance sigmoid sharpness
  double horizon_len = 2.0;   // primitive arc length [m]
  int n_samples = 16;         // integration points per primitive
  double fan_half_angle = deg2rad(120.0);

  void validate() const;
};

/// One candidate short-horizon primitive: a straight ray discretized into
/// midpoint samples.
struct Primitive {
  int index = 0;
  Vec2 direction;  // unit
  double bearing = 0.0;  // relative to fan center [rad]
  std::vector<Vec2> samples;
  double ds = 0.0;  // arc length per sample
  bool clipped = false;
};

struct PrimitiveScore {
  int index = 0;
  Vec2 direction;
  double risk_integral = 0.0;   // R_k
  double min_clearance = 0.0;   // C_k
  bool feasible = false;        // I_k
};

struct GateResult {
  double m_feas = 0.0;
  int k_star = -1;  // -1 when no feasible primitive exists
  int k_geo = 0;
  bool has_feasible = false;
  std::vector<PrimitiveScore> scores;
};

/// K straight rays of length horizon_len at equally spaced bearings spanning
/// +-fan_half_angle around `heading`, each discretized into n_samples
/// midpoints. Rays reaching outside the patch are clipped and later scored
/// infeasible.
std::vector<Primitive> sample_primitives(const Vec2& pos, const Vec2& heading,
                                         const GateParams& params, const RiskPatch& patch);

/// Midpoint-rule soft-risk integral, minimum SDF over samples, and the
/// traversability conjunction (on traversable cells and clearance above
/// delta_phi throughout).
PrimitiveScore score_primitive(const Primitive& primitive, const RiskPatch& patch,
                               const GateParams& params);

/// Index of the primitive closest in angle to `reference_dir`; ties break
/// toward the smaller index.
int closest_primitive(const std::vector<Primitive>& primitives, const Vec2& reference_dir);

/// Product-of-sigmoids gate over the best feasible candidate k*:
/// sigma(kappa_R[(R_kgeo - R_k*) - rho_R]) * sigma(kappa_C(C_k* - delta_phi)).
/// Returns m = 0 with k_star flagged -1 when no feasible primitive exists.
/// Ties in the argmin break toward the smallest angle to `geo_dir`.
GateResult gate_value(const std::vector<PrimitiveScore>& scores, int k_geo,
                      const GateParams& params, const std::vector<Primitive>& primitives,
                      const Vec2& geo_dir);

/// Convenience wrapper: sample, score, and gate at one position. `geo_dir`
/// is the instantaneous geometry-only force direction (lambda = 0); the fan
/// centers on the goal heading.
GateResult evaluate_gate(const Vec2& pos, const Vec2& goal_heading, const Vec2& geo_dir,
                         const RiskPatch& patch, const GateParams& params);

/// Smooth first-order gate sensitivities with the candidate selection frozen,
/// for the rollout sensitivity recursion. Accounts for sample translation and
/// fan rotation as the position moves.
struct GateGradient {
  double m_feas = 0.0;
  Vec2 dm_dq;
  double dm_dRstar = 0.0;  // partials w.r.t. the frozen candidate's scores
  double dm_dCstar = 0.0;
};

GateGradient gate_gradient(const Vec2& pos, const Vec2& goal, const Vec2& geo_dir,
                           const RiskPatch& patch, const GateParams& params);

/// Gate value plus (optionally) its position gradient, computed in one pass.
struct GateEvaluation {
  GateResult result;
  bool has_gradient = false;
  Vec2 dm_dq;
};

GateEvaluation evaluate_gate_at(const Vec2& pos, const Vec2& goal, const Vec2& geo_dir,
                                const RiskPatch& patch, const GateParams& params,
                                bool with_gradient);

}  // namespace riskfield
