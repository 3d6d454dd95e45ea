// Command-line front end. Links the shared library through its C API only;
// flag parsing and config merging happen here, the engine does the rest.
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskfield.h"

namespace {

using nlohmann::json;

struct CliOptions {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  int workers = -1;
  std::vector<std::string> variants;
  std::string out_dir;
  double alpha = -1.0;
  int batch = -1;
  int epochs = -1;
  double tau = -1.0;
  double delta = -1.0;
};

json load_file_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::string text;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
  std::fclose(f);
  return json::parse(text);
}

// Precedence: defaults (inside the library) < config file < flags.
json merged_config(const CliOptions& opt) {
  json cfg = load_file_config(opt.config_path);
  if (opt.seed_set) cfg["seed"] = opt.seed;
  if (opt.workers >= 0) cfg["workers"] = opt.workers;
  if (!opt.variants.empty()) cfg["variants"] = opt.variants;
  if (!opt.out_dir.empty()) cfg["out_dir"] = opt.out_dir;
  if (opt.alpha >= 0.0) {
    cfg["learner"]["alpha"] = opt.alpha;
    cfg["eval"]["alpha"] = opt.alpha;
  }
  if (opt.batch > 0) cfg["learner"]["batch"] = opt.batch;
  if (opt.epochs >= 0) cfg["learner"]["epochs"] = opt.epochs;
  if (opt.tau > 0.0) cfg["integrator"]["tau"] = opt.tau;
  if (opt.delta > 0.0) cfg["eval"]["delta"] = opt.delta;
  return cfg;
}

int run(rf_status (*command)(const char*, char**), const CliOptions& opt) {
  const std::string cfg = merged_config(opt).dump();
  char* message = nullptr;
  const rf_status status = command(cfg.c_str(), &message);
  if (message) {
    std::fputs(message, stdout);
    if (message[0] != '\0' && message[std::strlen(message) - 1] != '\n') std::fputc('\n', stdout);
    rf_string_free(message);
  }
  if (status != RF_OK) std::fprintf(stderr, "error: %s\n", rf_last_error());
  switch (status) {
    case RF_OK: return 0;
    case RF_ERR_INVALID_ARGUMENT: return 1;
    case RF_ERR_CHECK_FAILED: return 3;
    default: return 2;
  }
}

void add_common(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file (defaults < file < flags)");
  cmd->add_option("--seed", opt.seed, "global RNG seed")->each([&](const std::string&) {
    opt.seed_set = true;
  });
  cmd->add_option("--workers", opt.workers, "episode parallelism (0 = all cores)");
  cmd->add_option("--variant", opt.variants, "policy variant (repeatable)");
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--alpha", opt.alpha, "CVaR level");
  cmd->add_option("--batch", opt.batch, "episode batch size B");
  cmd->add_option("--epochs", opt.epochs, "training epochs");
  cmd->add_option("--tau", opt.tau, "integrator step size");
  cmd->add_option("--delta", opt.delta, "reaction threshold [m]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("riskfield ") + rf_version() +
               " - risk-field navigation engine (synthetic benchmark + training + metrics)"};
  app.require_subcommand(1);

  CliOptions opt;
  auto* gen = app.add_subcommand("generate", "write scenario specs and patch grids");
  auto* train = app.add_subcommand("train", "train variant checkpoints");
  auto* eval = app.add_subcommand("eval", "paired evaluation across variants");
  auto* theory = app.add_subcommand("theory", "run the empirical theory checks");
  auto* exp = app.add_subcommand("export", "export one episode's trajectory and grids");
  for (CLI::App* cmd : {gen, train, eval, theory, exp}) add_common(cmd, opt);

  bool show_config = false;
  app.add_flag("--show-config", show_config, "print the full default config (every key) and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (show_config) {
    char* cfg = nullptr;
    if (rf_default_config(&cfg) == RF_OK) {
      std::fputs(cfg, stdout);
      std::fputc('\n', stdout);
      rf_string_free(cfg);
      return 0;
    }
    std::fprintf(stderr, "error: %s\n", rf_last_error());
    return 2;
  }

  try {
    if (gen->parsed()) return run(&rf_cmd_generate, opt);
    if (train->parsed()) return run(&rf_cmd_train, opt);
    if (eval->parsed()) return run(&rf_cmd_eval, opt);
    if (theory->parsed()) return run(&rf_cmd_theory, opt);
    if (exp->parsed()) return run(&rf_cmd_export, opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
