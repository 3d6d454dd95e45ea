#include "riskfield/variants.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace riskfield {

const char* variant_name(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::GeometryOnly: return "GeometryOnly";
    case PolicyVariant::RiskLossOnly: return "RiskLossOnly";
    case PolicyVariant::FixedCoeffCtx: return "FixedCoeffCtx";
    case PolicyVariant::ScalarCtx: return "ScalarCtx";
    case PolicyVariant::NonRouteDirectionalCtx: return "NonRouteDirectionalCtx";
    case PolicyVariant::BlackBoxCvar: return "BlackBoxCvar";
    case PolicyVariant::CtxExpectedCost: return "CtxExpectedCost";
    case PolicyVariant::RouteAwareCtxCvar: return "RouteAwareCtxCvar";
  }
  return "?";
}

PolicyVariant variant_from_name(const std::string& name) {
  for (PolicyVariant v :
       {PolicyVariant::GeometryOnly, PolicyVariant::RiskLossOnly, PolicyVariant::FixedCoeffCtx,
        PolicyVariant::ScalarCtx, PolicyVariant::NonRouteDirectionalCtx, PolicyVariant::BlackBoxCvar,
        PolicyVariant::CtxExpectedCost, PolicyVariant::RouteAwareCtxCvar}) {
    if (name == variant_name(v)) return v;
  }
  throw std::invalid_argument("unknown variant: " + name);
}

VariantConfig variant_config(PolicyVariant v) {
  VariantConfig c;
  c.variant = v;
  switch (v) {
    case PolicyVariant::GeometryOnly:
      c.gate_mode = GateMode::AlwaysOpen;
      c.lambda_source = LambdaSource::Zero;
      c.trains_heads = false;
      break;
    case PolicyVariant::RiskLossOnly:
      // Risk enters the training loss only; the force channel stays closed.
      c.gate_mode = GateMode::AlwaysOpen;
      c.lambda_source = LambdaSource::Zero;
      c.trains_heads = false;
      break;
    case PolicyVariant::FixedCoeffCtx:
      c.gate_mode = GateMode::AlwaysOpen;
      c.lambda_source = LambdaSource::Fixed;
      c.trains_heads = false;
      break;
    case PolicyVariant::ScalarCtx:
      c.gate_mode = GateMode::AlwaysOpen;
      c.lambda_source = LambdaSource::Heads;
      break;
    case PolicyVariant::NonRouteDirectionalCtx:
      c.gate_mode = GateMode::GradientHeuristic;
      c.lambda_source = LambdaSource::Heads;
      break;
    case PolicyVariant::BlackBoxCvar:
      c.blackbox_force = true;
      c.lambda_source = LambdaSource::Zero;
      c.trains_heads = false;
      break;
    case PolicyVariant::CtxExpectedCost:
      c.gate_mode = GateMode::RouteAware;
      c.lambda_source = LambdaSource::Heads;
      c.train_alpha = 0.0;
      break;
    case PolicyVariant::RouteAwareCtxCvar:
      c.gate_mode = GateMode::RouteAware;
      c.lambda_source = LambdaSource::Heads;
      c.train_alpha = 0.95;
      break;
  }
  return c;
}

BlackBoxNet BlackBoxNet::init(uint64_t seed) {
  BlackBoxNet net;
  std::mt19937_64 rng(seed ^ 0xb1acb0f5ULL);
  auto draw = [&rng](size_t n, double scale) {
    std::vector<double> w(n);
    for (double& x : w) {
      const double u = ((rng() >> 11) * (1.0 / 9007199254740992.0)) * 2.0 - 1.0;
      x = scale * u;
    }
    return w;
  };
  net.w1 = draw(static_cast<size_t>(kInput) * kHidden, 0.3);
  net.b1 = draw(kHidden, 0.05);
  net.w2 = draw(static_cast<size_t>(kHidden) * kHidden, 0.2);
  net.b2 = draw(kHidden, 0.05);
  net.w3 = draw(static_cast<size_t>(kHidden) * 2, 0.2);
  net.b3 = draw(2, 0.0);
  return net;
}

Vec2 BlackBoxNet::force(const RiskPatch& patch, const Vec2& q, const Vec2& p, const Vec2& goal) const {
  const HeadFeatures feats = HeadFeatures::compute(patch, q, goal);
  const FieldSample r = patch.sample(q, Field::SoftRisk);
  const FieldSample phi = patch.sample(q, Field::Sdf);
  double in[kInput];
  for (int i = 0; i < HeadFeatures::kFeatureCount; ++i) in[i] = feats.values[i];
  in[HeadFeatures::kFeatureCount + 0] = r.value;
  in[HeadFeatures::kFeatureCount + 1] = r.grad.x;
  in[HeadFeatures::kFeatureCount + 2] = r.grad.y;
  in[HeadFeatures::kFeatureCount + 3] = std::tanh(phi.value);
  in[HeadFeatures::kFeatureCount + 4] = phi.grad.x;
  in[HeadFeatures::kFeatureCount + 5] = phi.grad.y;
  (void)p;

  double h1[kHidden];
  for (int j = 0; j < kHidden; ++j) {
    double acc = b1[j];
    for (int i = 0; i < kInput; ++i) acc += w1[j * kInput + i] * in[i];
    h1[j] = std::tanh(acc);
  }
  double h2[kHidden];
  for (int j = 0; j < kHidden; ++j) {
    double acc = b2[j];
    for (int i = 0; i < kHidden; ++i) acc += w2[j * kHidden + i] * h1[i];
    h2[j] = std::tanh(acc);
  }
  Vec2 out;
  double ox = b3[0], oy = b3[1];
  for (int i = 0; i < kHidden; ++i) {
    ox += w3[0 * kHidden + i] * h2[i];
    oy += w3[1 * kHidden + i] * h2[i];
  }
  out.x = force_scale * std::tanh(ox);
  out.y = force_scale * std::tanh(oy);
  return out;
}

size_t BlackBoxNet::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

double* BlackBoxNet::parameter(size_t i) {
  for (std::vector<double>* block : {&w1, &b1, &w2, &b2, &w3, &b3}) {
    if (i < block->size()) return &(*block)[i];
    i -= block->size();
  }
  throw std::out_of_range("blackbox parameter index");
}

std::pair<double, double> Policy::episode_lambdas(const RiskPatch& patch, const Vec2& start,
                                                  const Vec2& goal) const {
  switch (config.lambda_source) {
    case LambdaSource::Zero: return {0.0, 0.0};
    case LambdaSource::Fixed: return {config.fixed_lambda_s, config.fixed_lambda_h};
    case LambdaSource::Heads: {
      const HeadFeatures f = HeadFeatures::compute(patch, start, goal);
      const PredictedCoefficients pred = predict_coefficients(f, heads, params.lambda_max);
      return {pred.lambda_s, pred.lambda_h};
    }
  }
  return {0.0, 0.0};
}

RolloutOptions Policy::rollout_options(const GateParams& gate) const {
  RolloutOptions options;
  options.gate_mode = config.gate_mode;
  options.gate = gate;
  if (config.blackbox_force) {
    const BlackBoxNet& net = this->net;
    options.external_force = [&net](const PhaseState& x, const RiskPatch& patch, const Vec2& goal) {
      return net.force(patch, x.q, x.p, goal);
    };
  }
  return options;
}

RolloutRecord Policy::run(const ScenarioBundle& scenario, const IntegratorConfig& integrator,
                          const GateParams& gate) const {
  FieldParams p = params;
  const auto [ls, lh] =
      episode_lambdas(scenario.patch, scenario.spec.start, scenario.spec.goal);
  p.lambda_s = ls;
  p.lambda_h = lh;
  return rollout(scenario, p, integrator, rollout_options(gate));
}

Policy instantiate_variant(PolicyVariant variant, const FieldParams& base_params,
                           const CoefficientHeads& heads, uint64_t net_seed) {
  Policy policy;
  policy.config = variant_config(variant);
  policy.params = base_params;
  policy.params.lambda_s = 0.0;
  policy.params.lambda_h = 0.0;
  policy.heads = heads;
  if (policy.config.blackbox_force) policy.net = BlackBoxNet::init(net_seed);
  return policy;
}

void train_blackbox(Policy& policy, const ScenarioSampler& sampler, const IntegratorConfig& integrator,
                    const CostWeights& weights, const GateParams& gate, const SpsaConfig& config) {
  if (!policy.config.blackbox_force)
    throw std::invalid_argument("train_blackbox expects a black-box policy");
  std::mt19937_64 rng(config.seed ^ 0x5b5a0000ULL);
  const size_t n = policy.net.parameter_count();

  auto batch_cvar = [&](uint64_t base_index) {
    std::vector<double> costs;
    costs.reserve(config.batch);
    for (int i = 0; i < config.batch; ++i) {
      const ScenarioBundle bundle = sampler(base_index + i);
      const RolloutRecord rec = policy.run(bundle, integrator, gate);
      costs.push_back(episode_cost(rec, weights, bundle.spec.goal));
    }
    return empirical_cvar(costs, config.alpha).value;
  };

  uint64_t episode = 0;
  for (int it = 0; it < config.iterations; ++it) {
    // Rademacher perturbation; two evaluations per iteration.
    std::vector<int8_t> delta(n);
    for (int8_t& d : delta) d = (rng() & 1) ? 1 : -1;
    for (size_t i = 0; i < n; ++i) *policy.net.parameter(i) += config.perturb * delta[i];
    const double plus = batch_cvar(episode);
    for (size_t i = 0; i < n; ++i) *policy.net.parameter(i) -= 2.0 * config.perturb * delta[i];
    const double minus = batch_cvar(episode);
    for (size_t i = 0; i < n; ++i) *policy.net.parameter(i) += config.perturb * delta[i];

    const double scale = (plus - minus) / (2.0 * config.perturb);
    for (size_t i = 0; i < n; ++i)
      *policy.net.parameter(i) -= config.step * scale * delta[i];
    episode += config.batch;
  }
}

}  // namespace riskfield
