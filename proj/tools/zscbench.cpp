#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "zscbench/errors.hpp"
#include "zscbench/runner.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

zsc::ExperimentConfig load_with_overrides(const GlobalFlags& flags) {
  auto cfg = zsc::load_config(flags.config_path);
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.seed) cfg.base_seed = *flags.seed;
  return cfg;
}

void add_common(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", flags.out_dir, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zscbench: zero-shot classification variability benchmark"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global flags after a subcommand too

  GlobalFlags flags;
  int workers_flag = -1;
  std::uint64_t seed_flag = 0;
  const auto workers_opt =
      app.add_option("--workers", workers_flag, "worker threads (0 = auto)");
  const auto seed_opt = app.add_option("--seed", seed_flag, "override base_seed");

  auto* variability = app.add_subcommand("variability", "partition-variability protocol");
  auto* ensemble = app.add_subcommand("ensemble", "class-subset bagging protocol");
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  add_common(variability, flags);
  add_common(ensemble, flags);
  add_common(synth, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  if (workers_opt->count()) flags.workers = workers_flag;
  if (seed_opt->count()) flags.seed = seed_flag;

  try {
    if (variability->parsed()) {
      const auto cfg = load_with_overrides(flags);
      if (!std::holds_alternative<zsc::VariabilityProtocol>(cfg.protocol))
        throw zsc::ConfigError("config protocol type must be \"variability\"");
      zsc::cmd_variability(cfg, flags.out_dir);
    } else if (ensemble->parsed()) {
      const auto cfg = load_with_overrides(flags);
      if (!std::holds_alternative<zsc::EnsembleProtocol>(cfg.protocol))
        throw zsc::ConfigError("config protocol type must be \"ensemble\"");
      zsc::cmd_ensemble(cfg, flags.out_dir);
    } else if (synth->parsed()) {
      const auto cfg = load_with_overrides(flags);
      if (!cfg.synth) throw zsc::ConfigError("synth command needs a \"synth\" spec in config");
      zsc::SynthSpec spec = *cfg.synth;
      if (flags.seed) spec.seed = *flags.seed;
      zsc::cmd_synth(spec, flags.out_dir);
    }
  } catch (const zsc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
