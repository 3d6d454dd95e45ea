#include "riskfield.h"

#include <cstring>
#include <string>

#include "riskfield/io.hpp"
#include "riskfield/runner.hpp"

using namespace riskfield;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

rf_status set_error(rf_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Maps C++ failures onto status codes; invalid inputs and IO problems keep
// their own codes so callers can react without parsing messages.
template <typename Fn>
rf_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const std::invalid_argument& e) {
    return set_error(RF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const Json::exception& e) {
    return set_error(RF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return set_error(RF_ERR_RUNTIME, e.what());
  }
}

RunConfig config_from_string(const char* config_json) {
  if (config_json == nullptr) throw std::invalid_argument("config_json is null");
  Json overrides = Json::object();
  const std::string text(config_json);
  if (!text.empty()) overrides = Json::parse(text);
  Json merged = default_run_config();
  if (overrides.is_object()) {
    for (auto& [k, v] : overrides.items()) merged[k] = merged.contains(k) && merged[k].is_object() && v.is_object() ? [&] { Json m = merged[k]; m.update(v); return m; }() : v;
  }
  return run_config_from_json(merged);
}

rf_status run_command(CommandResult (*command)(const RunConfig&), const char* config_json,
                      char** message_out) {
  return guarded([&]() {
    const RunConfig config = load_run_config("", config_json ? Json::parse(config_json) : Json());
    const CommandResult result = command(config);
    if (message_out) *message_out = dup_string(result.message);
    switch (result.exit_code) {
      case 0: return RF_OK;
      case 1: return set_error(RF_ERR_INVALID_ARGUMENT, result.message);
      case 3: return set_error(RF_ERR_CHECK_FAILED, result.message);
      default: return set_error(RF_ERR_RUNTIME, result.message);
    }
  });
}

}  // namespace

struct rf_patch {
  ScenarioBundle bundle;
};

struct rf_rollout {
  RolloutRecord record;
  Vec2 goal;
  CostWeights weights;
};

extern "C" {

const char* rf_version(void) { return "0.1.0"; }

const char* rf_last_error(void) { return g_last_error.c_str(); }

void rf_string_free(char* s) { std::free(s); }

rf_status rf_default_config(char** json_out) {
  return guarded([&]() {
    if (!json_out) throw std::invalid_argument("json_out is null");
    *json_out = dup_string(default_run_config().dump(2));
    return RF_OK;
  });
}

rf_status rf_patch_create(const char* scenario_json, rf_patch** out) {
  return guarded([&]() {
    if (!scenario_json || !out) throw std::invalid_argument("null argument");
    const ScenarioSpec spec = scenario_spec_from_json(Json::parse(scenario_json));
    auto patch = new rf_patch{make_scenario(spec)};
    *out = patch;
    return RF_OK;
  });
}

rf_status rf_patch_sample(const rf_patch* patch, double x, double y, int field, double* value_out,
                          double* grad_out, int* clamped_out) {
  return guarded([&]() {
    if (!patch || !value_out) throw std::invalid_argument("null argument");
    if (field != RF_FIELD_SOFT_RISK && field != RF_FIELD_SDF)
      throw std::invalid_argument("unknown field id");
    const FieldSample s = patch->bundle.patch.sample(
        Vec2{x, y}, field == RF_FIELD_SOFT_RISK ? Field::SoftRisk : Field::Sdf);
    *value_out = s.value;
    if (grad_out) {
      grad_out[0] = s.grad.x;
      grad_out[1] = s.grad.y;
    }
    if (clamped_out) *clamped_out = s.clamped ? 1 : 0;
    return RF_OK;
  });
}

rf_status rf_patch_export_csv(const rf_patch* patch, const char* dir, const char* stem) {
  return guarded([&]() {
    if (!patch || !dir || !stem) throw std::invalid_argument("null argument");
    patch->bundle.patch.export_csv(dir, stem);
    return RF_OK;
  });
}

rf_status rf_patch_scenario_json(const rf_patch* patch, char** json_out) {
  return guarded([&]() {
    if (!patch || !json_out) throw std::invalid_argument("null argument");
    Json j = to_json(patch->bundle.spec);
    j["t_escape"] =
        patch->bundle.schedule.t_escape ? Json(*patch->bundle.schedule.t_escape) : Json();
    *json_out = dup_string(j.dump(2));
    return RF_OK;
  });
}

void rf_patch_destroy(rf_patch* patch) { delete patch; }

rf_status rf_rollout_run(const rf_patch* patch, const char* params_json, const char* options_json,
                         rf_rollout** out) {
  return guarded([&]() {
    if (!patch || !out) throw std::invalid_argument("null argument");
    FieldParams params;
    if (params_json && *params_json) {
      Json defaults = to_json(FieldParams{});
      defaults.update(Json::parse(params_json));
      params = field_params_from_json(defaults);
    }

    IntegratorConfig integrator;
    GateParams gate;
    CostWeights weights;
    PolicyVariant variant = PolicyVariant::RouteAwareCtxCvar;
    CoefficientHeads heads = CoefficientHeads::init_near_zero();
    bool lambda_given = params.lambda_s != 0.0 || params.lambda_h != 0.0;
    if (options_json && *options_json) {
      const Json j = Json::parse(options_json);
      if (j.contains("variant")) variant = variant_from_name(j["variant"].get<std::string>());
      if (j.contains("tau")) integrator.tau = j["tau"].get<double>();
      if (j.contains("horizon")) integrator.horizon = j["horizon"].get<int>();
      if (j.contains("heads")) heads = heads_from_json(j["heads"]);
    }

    Policy policy = instantiate_variant(variant, params, heads);
    if (lambda_given) {
      // Explicit coefficients override the variant's lambda source.
      policy.config.lambda_source = LambdaSource::Fixed;
      policy.config.fixed_lambda_s = params.lambda_s;
      policy.config.fixed_lambda_h = params.lambda_h;
    }
    auto result = new rf_rollout{policy.run(patch->bundle, integrator, gate),
                                 patch->bundle.spec.goal, weights};
    *out = result;
    return RF_OK;
  });
}

rf_status rf_rollout_summary(const rf_rollout* rollout, char** json_out) {
  return guarded([&]() {
    if (!rollout || !json_out) throw std::invalid_argument("null argument");
    const RolloutRecord& r = rollout->record;
    Json j{{"status", status_name(r.status)},
           {"steps", r.steps},
           {"arc", r.arc},
           {"cum_risk", r.cum_risk},
           {"hard_count", r.hard_count},
           {"left_patch", r.left_patch},
           {"cost", episode_cost(r, rollout->weights, rollout->goal)},
           {"final_q", Json::array({r.final_state().q.x, r.final_state().q.y})}};
    *json_out = dup_string(j.dump(2));
    return RF_OK;
  });
}

rf_status rf_rollout_export_csv(const rf_rollout* rollout, const char* path) {
  return guarded([&]() {
    if (!rollout || !path) throw std::invalid_argument("null argument");
    export_trajectory_csv(rollout->record, path);
    return RF_OK;
  });
}

void rf_rollout_destroy(rf_rollout* rollout) { delete rollout; }

rf_status rf_cvar(const double* costs, size_t n, double alpha, double* value_out, double* eta_out) {
  return guarded([&]() {
    if (!costs || !value_out) throw std::invalid_argument("null argument");
    const CvarResult res = empirical_cvar(std::vector<double>(costs, costs + n), alpha);
    *value_out = res.value;
    if (eta_out) *eta_out = res.eta_hat;
    return RF_OK;
  });
}

rf_status rf_cvar_upper_bound(const double* costs, size_t n, double alpha, double c_max,
                              double delta, int m_channels, double* value_out) {
  return guarded([&]() {
    if (!costs || !value_out) throw std::invalid_argument("null argument");
    *value_out =
        cvar_upper_bound(std::vector<double>(costs, costs + n), alpha, c_max, delta, m_channels);
    return RF_OK;
  });
}

rf_status rf_cmd_generate(const char* config_json, char** message_out) {
  return run_command(&cmd_generate, config_json, message_out);
}
rf_status rf_cmd_train(const char* config_json, char** message_out) {
  return run_command(&cmd_train, config_json, message_out);
}
rf_status rf_cmd_eval(const char* config_json, char** message_out) {
  return run_command(&cmd_eval, config_json, message_out);
}
rf_status rf_cmd_theory(const char* config_json, char** message_out) {
  return run_command(&cmd_theory, config_json, message_out);
}
rf_status rf_cmd_export(const char* config_json, char** message_out) {
  return run_command(&cmd_export, config_json, message_out);
}

}  // extern "C"
