#include "riskfield/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace riskfield {
namespace {

namespace fs = std::filesystem;

std::string checkpoint_path(const RunConfig& cfg, const std::string& variant) {
  const std::string dir = cfg.checkpoint_dir.empty() ? cfg.out_dir : cfg.checkpoint_dir;
  return dir + "/checkpoint_" + variant + ".json";
}

std::string geometry_checkpoint_path(const RunConfig& cfg) {
  return checkpoint_path(cfg, "geometry");
}

FieldParams obtain_geometry_checkpoint(const RunConfig& cfg) {
  const std::string path = geometry_checkpoint_path(cfg);
  if (fs::exists(path)) return read_checkpoint(path).first;
  if (!cfg.train_fit_geometry)
    throw std::runtime_error("missing geometry checkpoint: " + path);
  FieldParams params = fit_geometry_checkpoint(FieldParams{}, cfg.geometry, cfg.integrator,
                                               cfg.weights, cfg.seed);
  write_checkpoint(path, params, CoefficientHeads{}, "geometry");
  return params;
}

std::vector<Regime> regimes_for(const std::string& name) {
  if (name == "balanced") return {Regime::R1, Regime::R2, Regime::R3};
  return {regime_from_name(name)};
}

}  // namespace

CommandResult cmd_generate(const RunConfig& config) {
  const std::vector<Regime> regimes = regimes_for(config.scenario_regime);
  fs::create_directories(config.out_dir);
  const int per_regime = config.scenario_count / static_cast<int>(regimes.size());
  int written = 0;
  for (size_t r = 0; r < regimes.size(); ++r) {
    for (int i = 0; i < per_regime; ++i) {
      const ScenarioSpec spec =
          episode_spec(regimes[r], config.seed, static_cast<uint64_t>(i), config.geometry);
      const ScenarioBundle bundle = make_scenario(spec, config.gate);
      std::ostringstream stem;
      stem << regime_name(regimes[r]) << "_" << i;
      std::ofstream spec_out(config.out_dir + "/" + stem.str() + ".json");
      spec_out << to_json(bundle.spec).dump(2) << '\n';
      bundle.patch.export_csv(config.out_dir, stem.str());
      ++written;
    }
  }
  return {0, "wrote " + std::to_string(written) + " scenarios to " + config.out_dir};
}

CommandResult cmd_train(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  const FieldParams geometry = obtain_geometry_checkpoint(config);

  for (const std::string& name : config.variants) {
    const PolicyVariant variant = variant_from_name(name);
    const VariantConfig vc = variant_config(variant);

    if (vc.blackbox_force) {
      Policy policy = instantiate_variant(variant, geometry, CoefficientHeads{}, config.seed);
      TrainState state = TrainState::init(config.learner, geometry, config.geometry);
      state.gate = config.gate;
      state.integrator = config.integrator;
      state.weights = config.weights;
      SpsaConfig spsa;
      spsa.alpha = vc.train_alpha;
      spsa.seed = config.seed;
      train_blackbox(policy, mixture_sampler(state), config.integrator, config.weights, config.gate,
                     spsa);
      // The net itself is not serialized; the checkpoint records the frozen
      // geometric part and the net is re-derived from the seed.
      write_checkpoint(checkpoint_path(config, name), policy.params, policy.heads, name);
      continue;
    }

    if (!vc.trains_heads) {
      write_checkpoint(checkpoint_path(config, name), geometry, CoefficientHeads{}, name);
      continue;
    }

    TrainConfig tc = config.learner;
    tc.alpha = vc.train_alpha;
    TrainState state = TrainState::init(tc, geometry, config.geometry);
    state.gate = config.gate;
    state.gate_mode = vc.gate_mode;
    state.integrator = config.integrator;
    state.weights = config.weights;

    const std::string log_path = config.out_dir + "/train_" + name + ".csv";
    const ScenarioSampler sampler_factory = mixture_sampler(state);
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      // Resample the mixture against the current curriculum geometry.
      const ScenarioSampler sampler = mixture_sampler(state);
      const EpochDiagnostics diag = episode_update(state, sampler, tc.batch, tc.alpha);
      append_training_log(log_path, epoch, diag, state.phase, epoch == 0);
      if (!diag.stepped) {
        write_checkpoint(checkpoint_path(config, name), state.params, state.heads, name);
        return {2, "training aborted on non-finite gradient at epoch " + std::to_string(epoch) +
                       " (last good checkpoint written) for " + name};
      }
      if (state.epoch % 10 == 0) curriculum_advance(state);
    }
    write_checkpoint(checkpoint_path(config, name), state.params, state.heads, name);
  }
  return {0, "trained " + std::to_string(config.variants.size()) + " variants"};
}

CommandResult cmd_eval(const RunConfig& config) {
  const FieldParams geometry = obtain_geometry_checkpoint(config);
  std::vector<Policy> policies;
  for (const std::string& name : config.variants) {
    const PolicyVariant variant = variant_from_name(name);
    const VariantConfig vc = variant_config(variant);
    CoefficientHeads heads = CoefficientHeads::init_near_zero();
    FieldParams params = geometry;
    if (vc.lambda_source == LambdaSource::Heads || vc.blackbox_force) {
      const std::string path = checkpoint_path(config, name);
      if (!fs::exists(path))
        return {2, "missing checkpoint for variant " + name + ": " + path};
      auto [p, h] = read_checkpoint(path);
      params = p;
      heads = h;
    }
    policies.push_back(instantiate_variant(variant, params, heads, config.seed));
  }
  const MetricReport report =
      run_benchmark(policies, config.geometry, config.integrator, config.gate, config.eval);
  write_metric_report(report, config.out_dir);
  return {0, "report written to " + config.out_dir};
}

CommandResult cmd_theory(const RunConfig& config) {
  TheoryConfig tc;
  tc.geometry = config.geometry;
  tc.integrator = config.integrator;
  tc.gate = config.gate;
  tc.params = obtain_geometry_checkpoint(config);
  tc.seed = config.seed;
  tc.episodes = config.theory_episodes;
  tc.delta = config.eval.delta;

  const std::vector<TheoryCheckRow> rows = theory_check_suite(tc);
  fs::create_directories(config.out_dir);
  std::ofstream out(config.out_dir + "/theory.json");
  out << theory_rows_to_json(rows).dump(2) << '\n';

  std::ostringstream msg;
  bool all_pass = true;
  for (const TheoryCheckRow& r : rows) {
    msg << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.statistic << " = " << r.value
        << ")\n";
    all_pass = all_pass && r.pass;
  }
  return {all_pass ? 0 : 3, msg.str()};
}

CommandResult cmd_export(const RunConfig& config) {
  const FieldParams geometry = obtain_geometry_checkpoint(config);
  const PolicyVariant variant = variant_from_name(config.export_variant);
  const VariantConfig vc = variant_config(variant);
  CoefficientHeads heads;
  FieldParams params = geometry;
  if (vc.lambda_source == LambdaSource::Heads) {
    const std::string path = checkpoint_path(config, config.export_variant);
    if (!fs::exists(path))
      return {2, "missing checkpoint for variant " + config.export_variant + ": " + path};
    auto [p, h] = read_checkpoint(path);
    params = p;
    heads = h;
  }
  const Policy policy = instantiate_variant(variant, params, heads, config.seed);
  const ScenarioBundle bundle = make_scenario(
      episode_spec(Regime::DelayedEscape, config.seed, config.export_episode, config.geometry),
      config.gate);

  fs::create_directories(config.out_dir);
  const RolloutRecord rec = policy.run(bundle, config.integrator, config.gate);
  export_trajectory_csv(rec, config.out_dir + "/trajectory.csv");
  bundle.patch.export_csv(config.out_dir, "patch");

  std::ofstream gate_csv(config.out_dir + "/gate_trace.csv");
  gate_csv << "t,m_feas,k_star\n";
  for (int t = 0; t < rec.steps; ++t)
    gate_csv << t << ',' << rec.gate_trace[t].m_feas << ',' << rec.gate_trace[t].k_star << '\n';
  return {0, "exported episode " + std::to_string(config.export_episode) + " (" +
                 status_name(rec.status) + ")"};
}

}  // namespace riskfield
