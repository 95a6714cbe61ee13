#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "radnas/pipeline/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Range-Doppler detector with one-shot architecture search"};
  app.require_subcommand(1);
  std::string config;
  bool force = false;
  std::vector<std::string> overrides;
  bool check_only = false;

  for (const auto& cmd : radnas::pipeline::commands()) {
    auto* sub = app.add_subcommand(cmd, "run the " + cmd + " stage");
    sub->add_option("--config", config, "pipeline config file")->required()->check(CLI::ExistingFile);
    sub->add_flag("--force", force, "rerun even if outputs are up to date");
    sub->add_option("--set", overrides, "override a config value, key=value (dotted path)")
        ->take_all();
    sub->add_flag("--check", check_only, "validate the config and exit");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  if (check_only) {
    const auto violations = radnas::pipeline::validate_config(config, overrides);
    for (const auto& v : violations) std::cerr << v << "\n";
    if (violations.empty()) std::cout << config << ": ok\n";
    return violations.empty() ? 0 : 2;
  }
  radnas::pipeline::RunOptions options;
  options.force = force;
  options.overrides = overrides;
  return radnas::pipeline::run(command, config, options);
}
