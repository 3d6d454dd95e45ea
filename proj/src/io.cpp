#include "riskfield/io.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace riskfield {
namespace {

Json vec2_json(const Vec2& v) { return Json::array({v.x, v.y}); }
Vec2 vec2_from(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

void check_keys(const Json& j, const Json& reference, const std::string& path) {
  if (!j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (!reference.contains(key))
      throw std::invalid_argument("unknown config key: " + path + key);
    if (value.is_object()) check_keys(value, reference.at(key), path + key + ".");
  }
}

Json deep_merge(Json base, const Json& over) {
  if (!over.is_object() || !base.is_object()) return over;
  for (const auto& [key, value] : over.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      base[key] = deep_merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
  return base;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

Json to_json(const FieldParams& p) {
  return Json{{"mass", Json::array({p.mass.a, p.mass.b, p.mass.c, p.mass.d})},
              {"beta", p.beta},
              {"alpha", p.alpha},
              {"gamma", p.gamma},
              {"lambda_s", p.lambda_s},
              {"lambda_h", p.lambda_h},
              {"k_sharp", p.k_sharp},
              {"d_hat_phi", p.d_hat_phi},
              {"d_hat_ipc", p.d_hat_ipc},
              {"lambda_max", p.lambda_max}};
}

FieldParams field_params_from_json(const Json& j) {
  FieldParams p;
  check_keys(j, to_json(p), "params.");
  const auto m = j.at("mass");
  p.mass = {m.at(0), m.at(1), m.at(2), m.at(3)};
  p.beta = j.value("beta", p.beta);
  p.alpha = j.value("alpha", p.alpha);
  p.gamma = j.value("gamma", p.gamma);
  p.lambda_s = j.value("lambda_s", p.lambda_s);
  p.lambda_h = j.value("lambda_h", p.lambda_h);
  p.k_sharp = j.value("k_sharp", p.k_sharp);
  p.d_hat_phi = j.value("d_hat_phi", p.d_hat_phi);
  p.d_hat_ipc = j.value("d_hat_ipc", p.d_hat_ipc);
  p.lambda_max = j.value("lambda_max", p.lambda_max);
  p.validate();
  return p;
}

Json to_json(const CoefficientHeads& h) {
  return Json{{"w_soft", h.w_soft}, {"w_hard", h.w_hard}};
}

CoefficientHeads heads_from_json(const Json& j) {
  CoefficientHeads h;
  check_keys(j, to_json(h), "heads.");
  const auto ws = j.at("w_soft");
  const auto wh = j.at("w_hard");
  for (int i = 0; i < HeadFeatures::kFeatureCount; ++i) {
    h.w_soft[i] = ws.at(i);
    h.w_hard[i] = wh.at(i);
  }
  return h;
}

Json to_json(const ScenarioGeometry& g) {
  return Json{{"grid", g.grid},
              {"resolution", g.resolution},
              {"ramp_slope", g.ramp_slope},
              {"corridor_risk", g.corridor_risk},
              {"risk_floor", g.risk_floor},
              {"risk_cap", g.risk_cap},
              {"wall_offset_min", g.wall_offset_min},
              {"wall_offset_max", g.wall_offset_max},
              {"wall_thickness", g.wall_thickness},
              {"front_wall_x", g.front_wall_x},
              {"front_passage", g.front_passage},
              {"t_escape_min", g.t_escape_min},
              {"t_escape_max", g.t_escape_max},
              {"difficulty", g.difficulty}};
}

ScenarioGeometry scenario_geometry_from_json(const Json& j) {
  ScenarioGeometry g;
  check_keys(j, to_json(g), "geometry.");
  g.grid = j.value("grid", g.grid);
  g.resolution = j.value("resolution", g.resolution);
  g.ramp_slope = j.value("ramp_slope", g.ramp_slope);
  g.corridor_risk = j.value("corridor_risk", g.corridor_risk);
  g.risk_floor = j.value("risk_floor", g.risk_floor);
  g.risk_cap = j.value("risk_cap", g.risk_cap);
  g.wall_offset_min = j.value("wall_offset_min", g.wall_offset_min);
  g.wall_offset_max = j.value("wall_offset_max", g.wall_offset_max);
  g.wall_thickness = j.value("wall_thickness", g.wall_thickness);
  g.front_wall_x = j.value("front_wall_x", g.front_wall_x);
  g.front_passage = j.value("front_passage", g.front_passage);
  g.t_escape_min = j.value("t_escape_min", g.t_escape_min);
  g.t_escape_max = j.value("t_escape_max", g.t_escape_max);
  g.difficulty = j.value("difficulty", g.difficulty);
  return g;
}

Json to_json(const ScenarioSpec& s) {
  Json j{{"regime", regime_name(s.regime)},
         {"seed", s.seed},
         {"start", vec2_json(s.start)},
         {"goal", vec2_json(s.goal)},
         {"geometry", to_json(s.geometry)}};
  j["d_safe"] = s.d_safe ? vec2_json(*s.d_safe) : Json();
  return j;
}

ScenarioSpec scenario_spec_from_json(const Json& j) {
  ScenarioSpec s;
  check_keys(j, to_json(s), "scenario.");
  s.regime = regime_from_name(j.at("regime").get<std::string>());
  s.seed = j.at("seed").get<uint64_t>();
  if (j.contains("start") && !j.at("start").is_null()) s.start = vec2_from(j.at("start"));
  if (j.contains("goal") && !j.at("goal").is_null()) s.goal = vec2_from(j.at("goal"));
  if (j.contains("geometry")) s.geometry = scenario_geometry_from_json(j.at("geometry"));
  if (j.contains("d_safe") && !j.at("d_safe").is_null()) s.d_safe = vec2_from(j.at("d_safe"));
  return s;
}

Json default_run_config() { return run_config_to_json(RunConfig{}); }

Json run_config_to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  j["scenario"] = {{"regime", c.scenario_regime}, {"count", c.scenario_count}};
  j["geometry"] = to_json(c.geometry);
  j["integrator"] = {{"tau", c.integrator.tau},
                     {"horizon", c.integrator.horizon},
                     {"epsilon_hard", c.integrator.epsilon_hard},
                     {"goal_radius", c.integrator.goal_radius},
                     {"stuck_window", c.integrator.stuck_window},
                     {"stuck_tol", c.integrator.stuck_tol}};
  j["gate"] = {{"primitive_count", c.gate.primitive_count},
               {"delta_phi", c.gate.delta_phi},
               {"rho_risk", c.gate.rho_risk},
               {"kappa_risk", c.gate.kappa_risk},
               {"kappa_clear", c.gate.kappa_clear},
               {"horizon_len", c.gate.horizon_len},
               {"n_samples", c.gate.n_samples}};
  j["objective"] = {{"w_goal", c.weights.w_goal},
                    {"w_len", c.weights.w_len},
                    {"w_risk", c.weights.w_risk},
                    {"w_hard", c.weights.w_hard}};
  j["learner"] = {{"batch", c.learner.batch},
                  {"alpha", c.learner.alpha},
                  {"lr", c.learner.lr},
                  {"grad_clip", c.learner.grad_clip},
                  {"epochs", c.learner.epochs},
                  {"head_init_logit", c.learner.head_init_logit},
                  {"frac_delayed", c.learner.frac_delayed},
                  {"frac_r1", c.learner.frac_r1},
                  {"frac_r2", c.learner.frac_r2},
                  {"eta_tol", c.learner.eta_tol},
                  {"window", c.learner.window}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"static_r1", c.eval.static_r1},
               {"static_r2", c.eval.static_r2},
               {"delta", c.eval.delta},
               {"delta_sweep", c.eval.delta_sweep},
               {"alpha", c.eval.alpha},
               {"w_risk", c.eval.w_risk},
               {"w_hard_violation", c.eval.w_hard_violation},
               {"n_boot", c.eval.n_boot}};
  j["variants"] = c.variants;
  j["train"] = {{"fit_geometry", c.train_fit_geometry}};
  j["checkpoint_dir"] = c.checkpoint_dir;
  j["theory"] = {{"episodes", c.theory_episodes}};
  j["export"] = {{"variant", c.export_variant}, {"episode", c.export_episode}};
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  check_keys(j, default_run_config(), "");
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("scenario")) {
    c.scenario_regime = j["scenario"].value("regime", c.scenario_regime);
    c.scenario_count = j["scenario"].value("count", c.scenario_count);
  }
  if (j.contains("geometry")) c.geometry = scenario_geometry_from_json(j["geometry"]);
  if (j.contains("integrator")) {
    const Json& i = j["integrator"];
    c.integrator.tau = i.value("tau", c.integrator.tau);
    c.integrator.horizon = i.value("horizon", c.integrator.horizon);
    c.integrator.epsilon_hard = i.value("epsilon_hard", c.integrator.epsilon_hard);
    c.integrator.goal_radius = i.value("goal_radius", c.integrator.goal_radius);
    c.integrator.stuck_window = i.value("stuck_window", c.integrator.stuck_window);
    c.integrator.stuck_tol = i.value("stuck_tol", c.integrator.stuck_tol);
  }
  if (j.contains("gate")) {
    const Json& g = j["gate"];
    c.gate.primitive_count = g.value("primitive_count", c.gate.primitive_count);
    c.gate.delta_phi = g.value("delta_phi", c.gate.delta_phi);
    c.gate.rho_risk = g.value("rho_risk", c.gate.rho_risk);
    c.gate.kappa_risk = g.value("kappa_risk", c.gate.kappa_risk);
    c.gate.kappa_clear = g.value("kappa_clear", c.gate.kappa_clear);
    c.gate.horizon_len = g.value("horizon_len", c.gate.horizon_len);
    c.gate.n_samples = g.value("n_samples", c.gate.n_samples);
  }
  if (j.contains("objective")) {
    const Json& o = j["objective"];
    c.weights.w_goal = o.value("w_goal", c.weights.w_goal);
    c.weights.w_len = o.value("w_len", c.weights.w_len);
    c.weights.w_risk = o.value("w_risk", c.weights.w_risk);
    c.weights.w_hard = o.value("w_hard", c.weights.w_hard);
  }
  if (j.contains("learner")) {
    const Json& l = j["learner"];
    c.learner.batch = l.value("batch", c.learner.batch);
    c.learner.alpha = l.value("alpha", c.learner.alpha);
    c.learner.lr = l.value("lr", c.learner.lr);
    c.learner.grad_clip = l.value("grad_clip", c.learner.grad_clip);
    c.learner.epochs = l.value("epochs", c.learner.epochs);
    c.learner.head_init_logit = l.value("head_init_logit", c.learner.head_init_logit);
    c.learner.frac_delayed = l.value("frac_delayed", c.learner.frac_delayed);
    c.learner.frac_r1 = l.value("frac_r1", c.learner.frac_r1);
    c.learner.frac_r2 = l.value("frac_r2", c.learner.frac_r2);
    c.learner.eta_tol = l.value("eta_tol", c.learner.eta_tol);
    c.learner.window = l.value("window", c.learner.window);
  }
  if (j.contains("eval")) {
    const Json& e = j["eval"];
    c.eval.episodes = e.value("episodes", c.eval.episodes);
    c.eval.static_r1 = e.value("static_r1", c.eval.static_r1);
    c.eval.static_r2 = e.value("static_r2", c.eval.static_r2);
    c.eval.delta = e.value("delta", c.eval.delta);
    if (e.contains("delta_sweep")) c.eval.delta_sweep = e["delta_sweep"].get<std::vector<double>>();
    c.eval.alpha = e.value("alpha", c.eval.alpha);
    c.eval.w_risk = e.value("w_risk", c.eval.w_risk);
    c.eval.w_hard_violation = e.value("w_hard_violation", c.eval.w_hard_violation);
    c.eval.n_boot = e.value("n_boot", c.eval.n_boot);
  }
  if (j.contains("variants")) c.variants = j["variants"].get<std::vector<std::string>>();
  if (j.contains("train")) c.train_fit_geometry = j["train"].value("fit_geometry", true);
  c.checkpoint_dir = j.value("checkpoint_dir", std::string());
  if (j.contains("theory")) c.theory_episodes = j["theory"].value("episodes", c.theory_episodes);
  if (j.contains("export")) {
    c.export_variant = j["export"].value("variant", c.export_variant);
    c.export_episode = j["export"].value("episode", c.export_episode);
  }

  // Propagate the shared knobs into the nested configs.
  c.learner.seed = c.seed;
  c.learner.workers = c.workers;
  c.eval.seed = c.seed;
  c.eval.workers = c.workers;
  return c;
}

RunConfig load_run_config(const std::string& config_path, const Json& overrides) {
  Json merged = default_run_config();
  if (!config_path.empty()) {
    const Json file = read_json_file(config_path);
    check_keys(file, merged, "");
    merged = deep_merge(merged, file);
  }
  if (!overrides.is_null() && !overrides.empty()) {
    check_keys(overrides, default_run_config(), "");
    merged = deep_merge(merged, overrides);
  }
  return run_config_from_json(merged);
}

void write_checkpoint(const std::string& path, const FieldParams& params,
                      const CoefficientHeads& heads, const std::string& variant) {
  Json j{{"variant", variant}, {"params", to_json(params)}, {"heads", to_json(heads)}};
  write_json_file(path, j);
}

std::pair<FieldParams, CoefficientHeads> read_checkpoint(const std::string& path) {
  const Json j = read_json_file(path);
  return {field_params_from_json(j.at("params")), heads_from_json(j.at("heads"))};
}

Json batch_summary(const std::vector<double>& costs, double alpha) {
  const CvarResult cvar = empirical_cvar(costs, alpha);
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= static_cast<double>(costs.size());
  std::vector<size_t> tail;
  for (size_t i = 0; i < cvar.tail_mask.size(); ++i) {
    if (cvar.tail_mask[i]) tail.push_back(i);
  }
  return Json{{"alpha", alpha},
              {"eta_hat", cvar.eta_hat},
              {"cvar", cvar.value},
              {"mean", mean},
              {"tail_indices", tail}};
}

namespace {

Json ci_json(const ConfidenceInterval& ci) { return Json::array({ci.lo, ci.hi}); }

}  // namespace

Json report_to_json(const MetricReport& report) {
  Json out;
  out["episodes"] = report.config.episodes;
  out["delta"] = report.config.delta;
  out["alpha"] = report.config.alpha;
  out["variants"] = Json::array();
  for (const VariantReport& v : report.variants) {
    Json jv;
    jv["name"] = v.name;
    jv["false_pre_activation"] = v.temporal.false_pre_activation;
    jv["suppress_rate"] = v.temporal.suppress_rate;
    jv["mean_reaction_delay"] = v.temporal.mean_reaction_delay;
    jv["delay_sentinels"] = v.temporal.delay_sentinel_count;
    jv["mean_stale_exposure"] = v.temporal.mean_stale_exposure;
    jv["success"] = v.outcome.success;
    jv["violation_cvar"] = v.outcome.violation_cvar;
    jv["oscillation"] = v.outcome.mean_oscillation;
    jv["path_ratio"] = v.outcome.mean_path_ratio;
    jv["car"] = v.spatial.car;
    jv["far"] = v.spatial.far;
    jv["sr"] = v.spatial.sr_infinite ? Json("inf") : Json(v.spatial.sr);
    jv["auprc"] = v.spatial.auprc;
    jv["epsilon_act"] = v.spatial.epsilon_act;
    for (const auto& [name, ci] : v.ci) jv["ci"][name] = ci_json(ci);
    for (const auto& [name, value] : v.delta_sensitivity) jv["delta_sensitivity"][name] = value;
    out["variants"].push_back(std::move(jv));
  }
  return out;
}

void write_metric_report(const MetricReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir + "/report.json", report_to_json(report));

  std::ofstream csv(dir + "/report.csv");
  csv << "variant,false_pre_activation,suppress_rate,success,violation_cvar,car,far,sr,auprc,"
         "reaction_delay,stale_exposure,oscillation,path_ratio\n";
  for (const VariantReport& v : report.variants) {
    csv << v.name << ',' << v.temporal.false_pre_activation << ',' << v.temporal.suppress_rate
        << ',' << v.outcome.success << ',' << v.outcome.violation_cvar << ',' << v.spatial.car
        << ',' << v.spatial.far << ',' << v.spatial.sr << ',' << v.spatial.auprc << ','
        << v.temporal.mean_reaction_delay << ',' << v.temporal.mean_stale_exposure << ','
        << v.outcome.mean_oscillation << ',' << v.outcome.mean_path_ratio << '\n';
  }

  std::ofstream md(dir + "/report.md");
  md << "| Method | False pre-act | Suppress | Success | Viol. CVaR | CAR | FAR | SR | AUPRC |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  md.precision(3);
  md << std::fixed;
  for (const VariantReport& v : report.variants) {
    md << "| " << v.name << " | " << v.temporal.false_pre_activation << " | "
       << v.temporal.suppress_rate << " | " << v.outcome.success << " | "
       << v.outcome.violation_cvar << " | " << v.spatial.car << " | " << v.spatial.far << " | ";
    if (v.spatial.sr_infinite)
      md << "inf";
    else
      md << v.spatial.sr;
    md << " | " << v.spatial.auprc << " |\n";
  }
}

Json theory_rows_to_json(const std::vector<TheoryCheckRow>& rows) {
  Json out = Json::array();
  for (const TheoryCheckRow& r : rows) {
    out.push_back(Json{{"name", r.name},
                       {"statistic", r.statistic},
                       {"value", r.value},
                       {"threshold", r.threshold},
                       {"pass", r.pass}});
  }
  return out;
}

void append_training_log(const std::string& path, int epoch, const EpochDiagnostics& diag,
                         int phase, bool write_header) {
  std::ofstream out(path, write_header ? std::ios::trunc : std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (write_header)
    out << "epoch,cvar,mean_j,tail_size,grad_norm,lambda_s_mean,lambda_h_mean,violation_rate,"
           "success_rate,phase\n";
  out << epoch << ',' << diag.cvar << ',' << diag.mean_cost << ',' << diag.tail_size << ','
      << diag.grad_norm_post << ',' << diag.lambda_s_mean << ',' << diag.lambda_h_mean << ','
      << diag.violation_rate << ',' << diag.success_rate << ',' << phase << '\n';
}

}  // namespace riskfield
