#include <iostream>

#include <CLI11.hpp>

#include "entrate/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Relative entropy rate estimation for diffusion processes"};
  app.require_subcommand(1);

  entrate::cli::CommandOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  const char* names[] = {"simulate", "estimate", "sweep", "oracle", "compare"};
  const char* help[] = {"simulate a trajectory and write the subsampled points",
                        "estimate the rate and gradient field from a sample file",
                        "simulate, estimate and compare over a parameter sweep",
                        "tabulate exact rates by quadrature",
                        "compare estimates with the oracle table"};
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", opts.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "base seed (overrides sim.seed)");
    sub->add_flag("--full-scale", opts.full_scale, "use the full_scale sample profile");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : entrate::cli::kConfigError;
  }

  auto* sub = app.get_subcommands().front();
  if (!out.empty()) opts.out = out;
  if (sub->count("--seed")) opts.seed = seed;
  return entrate::cli::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
