#pragma once

#include <string>

#include "riskfield/learner.hpp"
#include "riskfield/rollout.hpp"

namespace riskfield {

/// The internal comparison family. Every variant is a configuration of the
/// same engine: a (gate mode, lambda source, objective alpha, force mask)
/// tuple.
enum class PolicyVariant {
  GeometryOnly,
  RiskLossOnly,
  FixedCoeffCtx,
  ScalarCtx,
  NonRouteDirectionalCtx,
  BlackBoxCvar,
  CtxExpectedCost,
  RouteAwareCtxCvar,
};

const char* variant_name(PolicyVariant v);
PolicyVariant variant_from_name(const std::string& name);

enum class LambdaSource { Zero, Fixed, Heads };

/// The documented per-variant configuration tuple. Diffing two variants'
/// configs shows exactly the fields that differ.
struct VariantConfig {
  PolicyVariant variant = PolicyVariant::RouteAwareCtxCvar;
  GateMode gate_mode = GateMode::RouteAware;
  LambdaSource lambda_source = LambdaSource::Heads;
  double fixed_lambda_s = 2.5;
  double fixed_lambda_h = 2.5;
  double train_alpha = 0.95;  // objective level used when training the variant
  bool trains_heads = true;   // risk loss reaches the force channel
  bool blackbox_force = false;

  bool operator==(const VariantConfig&) const = default;
};

VariantConfig variant_config(PolicyVariant v);

/// Two-hidden-layer state-to-force map for the black-box ablation. Inputs
/// are the head features at the current position plus local field samples.
struct BlackBoxNet {
  static constexpr int kInput = HeadFeatures::kFeatureCount + 6;
  static constexpr int kHidden = 32;
  std::vector<double> w1, b1, w2, b2, w3, b3;
  double force_scale = 3.0;

  static BlackBoxNet init(uint64_t seed);
  Vec2 force(const RiskPatch& patch, const Vec2& q, const Vec2& p, const Vec2& goal) const;
  size_t parameter_count() const;
  double* parameter(size_t i);
};

/// A runnable policy: variant configuration bound to parameters.
struct Policy {
  VariantConfig config;
  FieldParams params;       // geometric checkpoint (lambda filled per episode)
  CoefficientHeads heads;   // used when lambda_source == Heads
  BlackBoxNet net;          // used when blackbox_force

  /// Per-episode coefficients from the configured source.
  std::pair<double, double> episode_lambdas(const RiskPatch& patch, const Vec2& start,
                                            const Vec2& goal) const;

  RolloutOptions rollout_options(const GateParams& gate) const;

  /// Runs one episode under this policy.
  RolloutRecord run(const ScenarioBundle& scenario, const IntegratorConfig& integrator,
                    const GateParams& gate) const;
};

/// Binds a variant to the geometry-only checkpoint (and trained heads where
/// the variant uses them). Throws on unknown variants.
Policy instantiate_variant(PolicyVariant variant, const FieldParams& base_params,
                           const CoefficientHeads& heads = CoefficientHeads{},
                           uint64_t net_seed = 0);

/// Simultaneous-perturbation finite-difference training for the black-box
/// policy against the same CVaR objective (no rollout sensitivities exist
/// for it).
struct SpsaConfig {
  int iterations = 60;
  int batch = 16;
  double step = 0.05;
  double perturb = 0.05;
  double alpha = 0.95;
  uint64_t seed = 1;
};

void train_blackbox(Policy& policy, const ScenarioSampler& sampler, const IntegratorConfig& integrator,
                    const CostWeights& weights, const GateParams& gate, const SpsaConfig& config);

}  // namespace riskfield
