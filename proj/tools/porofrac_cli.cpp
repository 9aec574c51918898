// Command-line driver: forward and inversion runs from a JSON config.

#include <CLI11.hpp>
#include <cstdint>
#include <string>

#include "porofrac/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"porofrac - hydraulic phase-field fracture with single-scale and global-local "
               "forward models and EnKF-MCMC parameter identification"};
  app.require_subcommand(1);

  porofrac::CliOverrides cli;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;

  const char* modes[] = {"forward-ss", "forward-gl", "invert-ss", "invert-gl", "compare"};
  const char* descriptions[] = {
      "single-scale forward run (fine mesh)",
      "global-local forward run",
      "Bayesian inversion with the single-scale forward model",
      "Bayesian inversion with the global-local forward model",
      "run both models and report timing statistics",
  };

  std::string chosen;
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(modes[i], descriptions[i]);
    sub->add_option("--config", cli.config_path, "path to the JSON run configuration")
        ->required();
    sub->add_option("--jobs", cli.jobs, "max concurrent forward evaluations");
    sub->add_option("--seed", seed, "override bayes.seed")->each([&](const std::string&) {
      has_seed = true;
    });
    sub->add_option("--out", out_dir, "override output.directory");
    sub->callback([&, i] { chosen = modes[i]; });
  }

  CLI11_PARSE(app, argc, argv);

  if (!out_dir.empty()) cli.out_dir = out_dir;
  if (has_seed) cli.seed = seed;
  return porofrac::run_mode(chosen, cli);
}
