#pragma once

#include <array>
#include <vector>

#include "riskfield/geom.hpp"
#include "riskfield/patch.hpp"

namespace riskfield {

/// Point obstacles the contact barrier acts against, with one barrier
/// coefficient per anchor. Built either explicitly (tests, toys) or from a
/// patch's hazard boundary with a shared coefficient.
struct ObstacleSet {
  std::vector<Vec2> anchors;
  std::vector<double> alphas;

  static ObstacleSet from_patch(const RiskPatch& patch, double alpha);
  bool empty() const { return anchors.empty(); }
};

/// All energy coefficients of the factored Hamiltonian plus the head bound.
struct FieldParams {
  Mat2 mass = Mat2::identity();
  double beta = 1.0;        // goal attraction
  double alpha = 1.0;       // shared contact-barrier coefficient for patch anchors
  double gamma = 0.8;       // damping
  double lambda_s = 0.0;    // soft-risk coefficient
  double lambda_h = 0.0;    // hard-barrier coefficient
  double k_sharp = 10.0;    // softplus sharpness [1/m]
  double d_hat_phi = 0.5;   // hard-barrier activation distance [m]
  double d_hat_ipc = 0.5;   // contact-barrier activation distance [m]
  double lambda_max = 5.0;  // sigmoid head bound

  Mat2 mass_inv() const { return mass.inverse(); }
  void validate() const;  // throws std::invalid_argument on violated invariants
};

/// Incremental-potential contact barrier: -(d - d_hat)^2 log(d / d_hat) on
/// 0 < d < d_hat, zero beyond. Diverges as d -> 0+.
double ipc_barrier(double d, double d_hat);
double ipc_barrier_deriv(double d, double d_hat);
double ipc_barrier_deriv2(double d, double d_hat);

/// Softplus-relaxed inverse SDF b(phi) = k^-1 log(1 + e^{k(d_hat - phi)}).
struct SoftplusBarrier {
  double value = 0.0;
  double deriv = 0.0;  // in (-1, 0)
  double deriv2 = 0.0;
};
SoftplusBarrier softplus_barrier(double phi, double k, double d_hat);

/// Total stored energy at a phase-space state:
/// 1/2 p^T M^-1 p + beta |q - goal| + sum_j alpha_j b_ipc(d_j)
///   + gate * lambda_s r(q) + lambda_h b_sp(phi(q)).
/// With lambda_s = lambda_h = 0 this equals the geometry-only energy exactly.
double hamiltonian_total(const Vec2& q, const Vec2& p, const RiskPatch& patch,
                         const FieldParams& params, const Vec2& goal,
                         const ObstacleSet& obstacles, double gate_value = 1.0);

struct ContextForce {
  Vec2 soft;  // -gate * lambda_s * grad r
  Vec2 hard;  // -lambda_h * b'(phi) * grad phi
};

/// The two context force channels. The gate multiplies only the soft
/// channel.
ContextForce context_force(const Vec2& pos, const RiskPatch& patch, const FieldParams& params,
                           double gate_value);

/// Goal attraction plus contact-barrier repulsion; the gradient of the
/// geometric energy. Zero goal force inside a 1e-6 m ball around the goal.
Vec2 geometry_force(const Vec2& pos, const FieldParams& params, const Vec2& goal,
                    const ObstacleSet& obstacles);

/// Spatial Jacobian d F_geom / d q, needed by the sensitivity recursion.
Mat2 geometry_force_jacobian(const Vec2& pos, const FieldParams& params, const Vec2& goal,
                             const ObstacleSet& obstacles);

/// Patch statistics fed to the coefficient heads. Fixed length kFeatureCount:
/// [bias, mean risk, max risk, min SDF along goal ray (normalized),
///  traversable fraction, goal distance (normalized), cos bearing,
///  sin bearing].
struct HeadFeatures {
  static constexpr int kFeatureCount = 8;
  std::array<double, kFeatureCount> values{};

  static HeadFeatures compute(const RiskPatch& patch, const Vec2& pos, const Vec2& goal);
};

/// Linear sigmoid-bounded coefficient heads: lambda = lambda_max *
/// sigma(w . f) per coefficient.
struct CoefficientHeads {
  std::array<double, HeadFeatures::kFeatureCount> w_soft{};
  std::array<double, HeadFeatures::kFeatureCount> w_hard{};

  /// Heads start near zero output; the logit is carried by the bias feature.
  static CoefficientHeads init_near_zero(double bias_logit = -4.0);
};

struct PredictedCoefficients {
  double lambda_s = 0.0;
  double lambda_h = 0.0;
  // Closed-form Jacobians: d lambda / d w_i = lambda_max * sigma'(z) * f_i.
  std::array<double, HeadFeatures::kFeatureCount> dls_dw{};
  std::array<double, HeadFeatures::kFeatureCount> dlh_dw{};
};

PredictedCoefficients predict_coefficients(const HeadFeatures& features, const CoefficientHeads& heads,
                                           double lambda_max);

}  // namespace riskfield
