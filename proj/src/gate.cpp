#include "riskfield/gate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskfield {
namespace {

double angle_between(const Vec2& a, const Vec2& b) {
  const double d = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(d);
}

// Gradient of the goal-heading angle w.r.t. the agent position.
Vec2 heading_angle_gradient(const Vec2& pos, const Vec2& goal) {
  const Vec2 u = goal - pos;
  const double r2 = u.norm2();
  if (r2 < 1e-12) return {0.0, 0.0};
  return Vec2{u.y, -u.x} / r2;  // d theta / d pos = -u_perp / |u|^2
}

}  // namespace

void GateParams::validate() const {
  if (primitive_count < 2) throw std::invalid_argument("gate needs at least 2 primitives");
  if (kappa_risk <= 0.0 || kappa_clear <= 0.0) throw std::invalid_argument("kappas must be positive");
  if (horizon_len <= 0.0 || n_samples < 2) throw std::invalid_argument("bad primitive discretization");
}

std::vector<Primitive> sample_primitives(const Vec2& pos, const Vec2& heading,
                                         const GateParams& params, const RiskPatch& patch) {
  const int K = params.primitive_count;
  const double base = std::atan2(heading.y, heading.x);
  const double spacing = 2.0 * params.fan_half_angle / (K - 1);
  const double ds = params.horizon_len / params.n_samples;

  std::vector<Primitive> out;
  out.reserve(K);
  const Vec2 lo = patch.world_min();
  const Vec2 hi = patch.world_max();
  for (int k = 0; k < K; ++k) {
    Primitive prim;
    prim.index = k;
    prim.bearing = -params.fan_half_angle + k * spacing;
    const double theta = base + prim.bearing;
    prim.direction = {std::cos(theta), std::sin(theta)};
    prim.ds = ds;
    prim.samples.reserve(params.n_samples);
    for (int i = 0; i < params.n_samples; ++i) {
      const Vec2 s = pos + prim.direction * ((i + 0.5) * ds);
      if (s.x < lo.x || s.y < lo.y || s.x > hi.x || s.y > hi.y) {
        prim.clipped = true;
        break;
      }
      prim.samples.push_back(s);
    }
    out.push_back(std::move(prim));
  }
  return out;
}

PrimitiveScore score_primitive(const Primitive& primitive, const RiskPatch& patch,
                               const GateParams& params) {
  PrimitiveScore score;
  score.index = primitive.index;
  score.direction = primitive.direction;
  double min_phi = patch.sdf_cap();
  bool on_traversable = true;
  for (const Vec2& s : primitive.samples) {
    score.risk_integral += patch.sample(s, Field::SoftRisk).value * primitive.ds;
    min_phi = std::min(min_phi, patch.sample(s, Field::Sdf).value);
    on_traversable = on_traversable && patch.traversable(s);
  }
  score.min_clearance = min_phi;
  score.feasible =
      !primitive.clipped && on_traversable && score.min_clearance > params.delta_phi;
  return score;
}

int closest_primitive(const std::vector<Primitive>& primitives, const Vec2& reference_dir) {
  int best = 0;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const Primitive& p : primitives) {
    const double a = angle_between(p.direction, reference_dir);
    if (a < best_angle - 1e-12) {
      best_angle = a;
      best = p.index;
    }
  }
  return best;
}

GateResult gate_value(const std::vector<PrimitiveScore>& scores, int k_geo,
                      const GateParams& params, const std::vector<Primitive>& primitives,
                      const Vec2& geo_dir) {
  if (scores.empty()) throw std::invalid_argument("gate_value: empty score list");
  GateResult res;
  res.k_geo = k_geo;
  res.scores = scores;

  int k_star = -1;
  double best_risk = std::numeric_limits<double>::infinity();
  double best_angle = std::numeric_limits<double>::infinity();
  for (const PrimitiveScore& s : scores) {
    if (!s.feasible) continue;
    const double a = angle_between(s.direction, geo_dir);
    // Argmin over risk; ties break toward the smaller deviation angle.
    if (s.risk_integral < best_risk - 1e-12 ||
        (std::abs(s.risk_integral - best_risk) <= 1e-12 && a < best_angle)) {
      best_risk = s.risk_integral;
      best_angle = a;
      k_star = s.index;
    }
  }
  if (k_star < 0) {
    res.m_feas = 0.0;
    res.k_star = -1;
    res.has_feasible = false;
    return res;
  }
  res.k_star = k_star;
  res.has_feasible = true;
  const double improvement = scores[k_geo].risk_integral - scores[k_star].risk_integral;
  res.m_feas = sigmoid(params.kappa_risk * (improvement - params.rho_risk)) *
               sigmoid(params.kappa_clear * (scores[k_star].min_clearance - params.delta_phi));
  (void)primitives;
  return res;
}

GateResult evaluate_gate(const Vec2& pos, const Vec2& goal_heading, const Vec2& geo_dir,
                         const RiskPatch& patch, const GateParams& params) {
  const std::vector<Primitive> prims = sample_primitives(pos, goal_heading, params, patch);
  std::vector<PrimitiveScore> scores;
  scores.reserve(prims.size());
  for (const Primitive& p : prims) scores.push_back(score_primitive(p, patch, params));
  const int k_geo = closest_primitive(prims, geo_dir);
  return gate_value(scores, k_geo, params, prims, geo_dir);
}

namespace {

GateGradient gate_gradient_impl(const Vec2& pos, const Vec2& goal,
                                const std::vector<Primitive>& prims,
                                const std::vector<PrimitiveScore>& scores, int k_geo,
                                const GateResult& res, const RiskPatch& patch,
                                const GateParams& params) {
  GateGradient grad;
  grad.m_feas = res.m_feas;
  if (!res.has_feasible) return grad;  // flat zero region

  const Vec2 dtheta_dq = heading_angle_gradient(pos, goal);

  // d R_k / d q with the fan carried along: samples translate with the agent
  // and rotate with the goal heading.
  auto risk_gradient = [&](const Primitive& prim) {
    Vec2 g{0.0, 0.0};
    const Vec2 dperp = prim.direction.perp();
    for (size_t i = 0; i < prim.samples.size(); ++i) {
      const double ell = (i + 0.5) * prim.ds;
      const Vec2 gr = patch.sample(prim.samples[i], Field::SoftRisk).grad;
      g += prim.ds * (gr + dtheta_dq * (ell * dperp.dot(gr)));
    }
    return g;
  };
  auto clearance_gradient = [&](const Primitive& prim) {
    Vec2 g{0.0, 0.0};
    double min_phi = std::numeric_limits<double>::infinity();
    size_t arg = 0;
    for (size_t i = 0; i < prim.samples.size(); ++i) {
      const double phi = patch.sample(prim.samples[i], Field::Sdf).value;
      if (phi < min_phi) {
        min_phi = phi;
        arg = i;
      }
    }
    if (prim.samples.empty()) return g;
    const double ell = (arg + 0.5) * prim.ds;
    const Vec2 gphi = patch.sample(prim.samples[arg], Field::Sdf).grad;
    g = gphi + dtheta_dq * (ell * prim.direction.perp().dot(gphi));
    return g;
  };

  const double improvement =
      scores[k_geo].risk_integral - scores[res.k_star].risk_integral;
  const double zr = params.kappa_risk * (improvement - params.rho_risk);
  const double zc = params.kappa_clear * (scores[res.k_star].min_clearance - params.delta_phi);
  const double sr = sigmoid(zr);
  const double sc = sigmoid(zc);
  const double srp = sigmoid_deriv(zr);
  const double scp = sigmoid_deriv(zc);

  const Vec2 dRg = risk_gradient(prims[k_geo]);
  const Vec2 dRs = risk_gradient(prims[res.k_star]);
  const Vec2 dCs = clearance_gradient(prims[res.k_star]);

  grad.dm_dq = srp * params.kappa_risk * sc * (dRg - dRs) + sr * scp * params.kappa_clear * dCs;
  grad.dm_dRstar = -srp * params.kappa_risk * sc;
  grad.dm_dCstar = sr * scp * params.kappa_clear;
  return grad;
}

}  // namespace

GateGradient gate_gradient(const Vec2& pos, const Vec2& goal, const Vec2& geo_dir,
                           const RiskPatch& patch, const GateParams& params) {
  const Vec2 heading = (goal - pos).normalized();
  const std::vector<Primitive> prims = sample_primitives(pos, heading, params, patch);
  std::vector<PrimitiveScore> scores;
  scores.reserve(prims.size());
  for (const Primitive& p : prims) scores.push_back(score_primitive(p, patch, params));
  const int k_geo = closest_primitive(prims, geo_dir);
  const GateResult res = gate_value(scores, k_geo, params, prims, geo_dir);
  return gate_gradient_impl(pos, goal, prims, scores, k_geo, res, patch, params);
}

GateEvaluation evaluate_gate_at(const Vec2& pos, const Vec2& goal, const Vec2& geo_dir,
                                const RiskPatch& patch, const GateParams& params,
                                bool with_gradient) {
  const Vec2 heading = (goal - pos).normalized();
  const std::vector<Primitive> prims = sample_primitives(pos, heading, params, patch);
  std::vector<PrimitiveScore> scores;
  scores.reserve(prims.size());
  for (const Primitive& p : prims) scores.push_back(score_primitive(p, patch, params));
  const int k_geo = closest_primitive(prims, geo_dir);

  GateEvaluation eval;
  eval.result = gate_value(scores, k_geo, params, prims, geo_dir);
  if (with_gradient) {
    const GateGradient g =
        gate_gradient_impl(pos, goal, prims, scores, k_geo, eval.result, patch, params);
    eval.has_gradient = true;
    eval.dm_dq = g.dm_dq;
  }
  return eval;
}

}  // namespace riskfield
