#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <utility>

#include "decaylab/errors.hpp"
#include "decaylab/experiment.hpp"

using namespace decaylab;

int main(int argc, char** argv) {
  CLI::App app{"decaylab: heat-semigroup decay experiments"};
  app.require_subcommand(1);
  std::string config_path, out;
  bool print_config = false;
  const std::pair<const char*, const char*> commands[] = {
      {"harmonic", "solve for the positive harmonic profile U and estimate A"},
      {"evolve", "evolve the configured datum and record norm traces"},
      {"rates", "empirical decay rates against the rate table"},
      {"invariants", "conservation, contraction, positivity and growth checks"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output root; results go to <out>/<config hash>/<command>");
    sub->add_flag("--print-config", print_config, "print the canonical config and exit");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const ExperimentConfig config = load_config(config_path);
    validate(config);
    if (print_config) {
      std::cout << serialize_config(config);
      return 0;
    }
    CommandResult r;
    if (command == "harmonic") r = cmd_harmonic(config, out);
    else if (command == "evolve") r = cmd_evolve(config, out);
    else if (command == "rates") r = cmd_rates(config, out);
    else r = cmd_invariants(config, out);
    std::cout << r.directory << "/report.json\n";
    return r.exit_code;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
