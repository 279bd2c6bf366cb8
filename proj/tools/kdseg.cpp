#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kdseg/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kdseg: student training on teacher pseudo-labels for binary nuclei segmentation"};
  app.require_subcommand(1);

  kdseg::RunConfig run;
  std::string config;
  std::string output;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "JSON config file with per-command sections");
  app.add_option("--set", run.overrides, "Override a config value, e.g. train.epochs=5 (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--output", output, "Directory receiving every output of the command");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream");

  const std::pair<const char*, const char*> commands[] = {
      {"synth", "Generate a synthetic dataset with instance labels"},
      {"pseudolabel", "Write teacher pseudo-labels for train/val records"},
      {"train", "Train the student network"},
      {"predict", "Write probability maps for one split"},
      {"evaluate", "Score predictions against labels"},
      {"compare", "Mann-Whitney U comparison of several prediction sets"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kdseg::kExitOk : kdseg::kExitConfig;
  }

  run.command = app.get_subcommands().front()->get_name();
  run.config_path = config;
  run.output_dir = output;
  if (seed_opt->count() > 0) run.seed = seed;
  return kdseg::run_command(run, std::cout, std::cerr);
}
