#include "riskfield/energy.hpp"

#include <algorithm>
#include <stdexcept>

namespace riskfield {

ObstacleSet ObstacleSet::from_patch(const RiskPatch& patch, double alpha) {
  ObstacleSet set;
  set.anchors = patch.hazard_anchors();
  set.alphas.assign(set.anchors.size(), alpha);
  return set;
}

void FieldParams::validate() const {
  if (mass.min_eig_sym() <= 0.0) throw std::invalid_argument("mass must be SPD");
  if (beta < 0.0 || alpha < 0.0 || gamma < 0.0 || lambda_s < 0.0 || lambda_h < 0.0)
    throw std::invalid_argument("coefficients must be nonnegative");
  if (k_sharp <= 0.0 || d_hat_phi <= 0.0 || d_hat_ipc <= 0.0 || lambda_max <= 0.0)
    throw std::invalid_argument("scales must be positive");
  if (lambda_s > lambda_max || lambda_h > lambda_max)
    throw std::invalid_argument("lambda exceeds lambda_max");
}

double ipc_barrier(double d, double d_hat) {
  if (d <= 0.0) throw std::domain_error("ipc_barrier: contact already violated (d <= 0)");
  if (d >= d_hat) return 0.0;
  const double gap = d - d_hat;
  return -gap * gap * std::log(d / d_hat);
}

double ipc_barrier_deriv(double d, double d_hat) {
  if (d <= 0.0) throw std::domain_error("ipc_barrier: contact already violated (d <= 0)");
  if (d >= d_hat) return 0.0;
  const double gap = d - d_hat;
  return -2.0 * gap * std::log(d / d_hat) - gap * gap / d;
}

double ipc_barrier_deriv2(double d, double d_hat) {
  if (d <= 0.0) throw std::domain_error("ipc_barrier: contact already violated (d <= 0)");
  if (d >= d_hat) return 0.0;
  const double gap = d - d_hat;
  return -2.0 * std::log(d / d_hat) - 4.0 * gap / d + gap * gap / (d * d);
}

SoftplusBarrier softplus_barrier(double phi, double k, double d_hat) {
  SoftplusBarrier b;
  const double z = k * (d_hat - phi);
  b.value = softplus(z) / k;
  b.deriv = -sigmoid(z);
  b.deriv2 = k * sigmoid_deriv(z);
  return b;
}

double hamiltonian_total(const Vec2& q, const Vec2& p, const RiskPatch& patch,
                         const FieldParams& params, const Vec2& goal,
                         const ObstacleSet& obstacles, double gate_value) {
  const Mat2 minv = params.mass_inv();
  double h = 0.5 * p.dot(minv * p);
  h += params.beta * (q - goal).norm();
  for (size_t j = 0; j < obstacles.anchors.size(); ++j) {
    const double d = (q - obstacles.anchors[j]).norm();
    if (d < params.d_hat_ipc) h += obstacles.alphas[j] * ipc_barrier(d, params.d_hat_ipc);
  }
  if (params.lambda_s != 0.0 || params.lambda_h != 0.0) {
    const FieldSample r = patch.sample(q, Field::SoftRisk);
    const FieldSample phi = patch.sample(q, Field::Sdf);
    h += gate_value * params.lambda_s * r.value;
    h += params.lambda_h * softplus_barrier(phi.value, params.k_sharp, params.d_hat_phi).value;
  }
  return h;
}

ContextForce context_force(const Vec2& pos, const RiskPatch& patch, const FieldParams& params,
                           double gate_value) {
  ContextForce f;
  if (params.lambda_s != 0.0) {
    const FieldSample r = patch.sample(pos, Field::SoftRisk);
    f.soft = -gate_value * params.lambda_s * r.grad;
  }
  if (params.lambda_h != 0.0) {
    const FieldSample phi = patch.sample(pos, Field::Sdf);
    const SoftplusBarrier b = softplus_barrier(phi.value, params.k_sharp, params.d_hat_phi);
    f.hard = -params.lambda_h * b.deriv * phi.grad;
  }
  return f;
}

Vec2 geometry_force(const Vec2& pos, const FieldParams& params, const Vec2& goal,
                    const ObstacleSet& obstacles) {
  Vec2 f;
  const Vec2 to_goal = pos - goal;
  const double r = to_goal.norm();
  if (r > 1e-6) f -= params.beta / r * to_goal;
  for (size_t j = 0; j < obstacles.anchors.size(); ++j) {
    const Vec2 diff = pos - obstacles.anchors[j];
    const double d = diff.norm();
    if (d <= 0.0 || d >= params.d_hat_ipc) continue;
    f -= obstacles.alphas[j] * ipc_barrier_deriv(d, params.d_hat_ipc) / d * diff;
  }
  return f;
}

Mat2 geometry_force_jacobian(const Vec2& pos, const FieldParams& params, const Vec2& goal,
                             const ObstacleSet& obstacles) {
  Mat2 jac = Mat2::zero();
  const Vec2 to_goal = pos - goal;
  const double r = to_goal.norm();
  if (r > 1e-6) {
    const Vec2 u = to_goal / r;
    jac += -params.beta / r * (Mat2::identity() - Mat2::outer(u, u));
  }
  for (size_t j = 0; j < obstacles.anchors.size(); ++j) {
    const Vec2 diff = pos - obstacles.anchors[j];
    const double d = diff.norm();
    if (d <= 0.0 || d >= params.d_hat_ipc) continue;
    const Vec2 u = diff / d;
    const double b1 = ipc_barrier_deriv(d, params.d_hat_ipc);
    const double b2 = ipc_barrier_deriv2(d, params.d_hat_ipc);
    jac += -obstacles.alphas[j] * (b2 * Mat2::outer(u, u) + b1 / d * (Mat2::identity() - Mat2::outer(u, u)));
  }
  return jac;
}

HeadFeatures HeadFeatures::compute(const RiskPatch& patch, const Vec2& pos, const Vec2& goal) {
  HeadFeatures f;
  const int w = patch.width();
  const int h = patch.height();
  double mean_r = 0.0;
  double max_r = 0.0;
  double trav = 0.0;
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const double r = patch.soft_risk_at(ix, iy);
      mean_r += r;
      max_r = std::max(max_r, r);
      trav += patch.traversable_at(ix, iy) ? 1.0 : 0.0;
    }
  }
  const double n = static_cast<double>(w) * h;
  mean_r /= n;
  trav /= n;

  // Min SDF along the ray from pos to goal, 33 samples.
  const Vec2 disp = goal - pos;
  double min_sdf = patch.sdf_cap();
  for (int i = 0; i <= 32; ++i) {
    const Vec2 s = pos + disp * (static_cast<double>(i) / 32.0);
    min_sdf = std::min(min_sdf, patch.sample(s, Field::Sdf).value);
  }

  const double dist = disp.norm();
  const Vec2 dir = disp.normalized();
  const double span = std::max(patch.world_max().x - patch.world_min().x,
                               patch.world_max().y - patch.world_min().y);
  f.values = {1.0,
              mean_r,
              max_r,
              std::clamp(min_sdf / patch.sdf_cap(), -1.0, 1.0),
              trav,
              std::clamp(dist / span, 0.0, 1.5),
              dir.x,
              dir.y};
  return f;
}

CoefficientHeads CoefficientHeads::init_near_zero(double bias_logit) {
  CoefficientHeads h;
  h.w_soft[0] = bias_logit;
  h.w_hard[0] = bias_logit;
  return h;
}

PredictedCoefficients predict_coefficients(const HeadFeatures& features, const CoefficientHeads& heads,
                                           double lambda_max) {
  PredictedCoefficients out;
  double zs = 0.0;
  double zh = 0.0;
  for (int i = 0; i < HeadFeatures::kFeatureCount; ++i) {
    zs += heads.w_soft[i] * features.values[i];
    zh += heads.w_hard[i] * features.values[i];
  }
  out.lambda_s = lambda_max * sigmoid(zs);
  out.lambda_h = lambda_max * sigmoid(zh);
  const double ds = lambda_max * sigmoid_deriv(zs);
  const double dh = lambda_max * sigmoid_deriv(zh);
  for (int i = 0; i < HeadFeatures::kFeatureCount; ++i) {
    out.dls_dw[i] = ds * features.values[i];
    out.dlh_dw[i] = dh * features.values[i];
  }
  return out;
}

}  // namespace riskfield
