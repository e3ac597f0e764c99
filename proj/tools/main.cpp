#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stackrl/experiment.hpp"
#include "stackrl/oracle.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& output_root,
            bool verbose) {
  stackrl::ExperimentConfig config =
      stackrl::ExperimentConfig::load_file(config_path);
  std::string root = stackrl::resolve_output_root(output_root);
  stackrl::ExperimentResult result =
      stackrl::run_experiment(config, root, verbose, std::cout);
  std::cout << "bundle: " << result.bundle_dir << "\n";
  if (!result.all_completed()) {
    std::cout << "status: INCOMPLETE (see failures.csv)\n";
    return 1;
  }
  std::cout << "status: complete\n";
  return 0;
}

int cmd_plot(const std::string& bundle_dir) {
  stackrl::ExperimentResult bundle = stackrl::load_bundle(bundle_dir);
  std::string path = stackrl::emit_plots(bundle);
  std::cout << "plot: " << path << "\n";
  return 0;
}

int cmd_verify(const std::string& bundle_dir) {
  stackrl::ExperimentResult bundle = stackrl::load_bundle(bundle_dir);
  std::vector<stackrl::Verdict> verdicts = stackrl::verify_against_oracle(bundle);
  for (const stackrl::Verdict& verdict : verdicts) {
    std::printf("%-34s %s  value=%.6g threshold=%.6g  %s\n",
                verdict.check.c_str(), verdict.pass ? "pass" : "FAIL",
                verdict.value, verdict.threshold, verdict.detail.c_str());
  }
  bool ok = stackrl::all_pass(verdicts);
  std::cout << (ok ? "verdict: pass" : "verdict: FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_oracle(const std::string& setting, int items, int messages,
               double grid) {
  stackrl::AllocationParams allocation;
  allocation.items = items;
  allocation.messages = messages;
  stackrl::BayesianGame game = stackrl::make_setting(setting, allocation);
  if (setting == "maintain" || setting == "escape" ||
      setting == "matrix_design") {
    std::cout << stackrl::solve_deterministic_stackelberg(game).report(setting);
  } else if (setting == "maintain_randomized") {
    std::cout << stackrl::solve_deterministic_stackelberg(game).report(
        setting + " (deterministic bound)");
    std::cout << stackrl::solve_randomized_stackelberg(game, grid).report(
        setting + " (randomized)");
  } else if (setting == "allocation") {
    std::cout << stackrl::solve_allocation_commitment(game).report(
        setting + "(" + std::to_string(items) + "," +
        std::to_string(messages) + ")");
  } else if (setting == "mu_spm") {
    std::cout << "== messages ignored ==\n"
              << stackrl::solve_spm_exhaustive(game.spm, false).report();
    std::cout << "== message-conditioned ==\n"
              << stackrl::solve_spm_exhaustive(game.spm, true).report();
  } else {
    std::cerr << "unknown setting '" << setting << "'\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg commitment learning experiments"};
  app.require_subcommand(1);

  std::string config_path, bundle_dir, setting, output_root;
  bool verbose = false;
  int items = 3, messages = 3;
  double grid = 0.01;

  CLI::App* run = app.add_subcommand("run", "Train every seed of one config");
  run->add_option("config", config_path, "experiment config JSON")->required();
  run->add_option("--output-root", output_root,
                  "bundle root (default: STACKRL_OUTPUT_ROOT or '.')");
  run->add_flag("--verbose", verbose,
                "also log per-episode training rewards");

  CLI::App* plot = app.add_subcommand("plot", "Render a bundle's curves");
  plot->add_option("bundle", bundle_dir, "bundle directory")->required();

  CLI::App* verify =
      app.add_subcommand("verify", "Check a bundle against its oracle");
  verify->add_option("bundle", bundle_dir, "bundle directory")->required();

  CLI::App* oracle =
      app.add_subcommand("oracle", "Print the exact solution of a setting");
  oracle->add_option("setting", setting,
                     "maintain, maintain_randomized, escape, matrix_design, "
                     "allocation, mu_spm")
      ->required();
  oracle->add_option("--items", items, "allocation: number of items");
  oracle->add_option("--messages", messages, "allocation: number of messages");
  oracle->add_option("--grid", grid, "randomized oracle grid resolution");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, output_root, verbose);
    if (plot->parsed()) return cmd_plot(bundle_dir);
    if (verify->parsed()) return cmd_verify(bundle_dir);
    return cmd_oracle(setting, items, messages, grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
