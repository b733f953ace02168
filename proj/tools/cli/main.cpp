#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace kinetic::cli;
  CLI::App app{"kinetic: Markov semigroups, H-theorem and maximum-principle checks for diffusion generators"};
  app.require_subcommand(1);
  app.fallthrough();

  CommandOptions opt;
  std::string out;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int grid_n = 0;
  auto* out_opt = app.add_option("--out", out, "Output directory")->type_name("DIR");
  auto* seed_opt = app.add_option("--seed", seed, "Oracle seed override")->type_name("U64");
  auto* tol_opt = app.add_option("--tol", tol, "Uniformization tolerance override, in (0, 1e-6]")->type_name("REAL");
  auto* grid_opt = app.add_option("--grid-n", grid_n, "Grid nodes per axis override")->type_name("INT");

  std::string file;
  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const std::filesystem::path&, const CommandOptions&);
  };
  const Entry entries[] = {
      {"run", "discretize, evolve and check every invariant of a scenario", cmd_run},
      {"pawula", "maximum-principle certificate for an operator document", cmd_pawula},
      {"invariant", "discrete invariant density of a scenario", cmd_invariant},
      {"hcurve", "H-curves with dissipation and boundary terms", cmd_hcurve},
      {"oracle-compare", "particle oracle against the PDE path", cmd_oracle_compare},
  };
  int (*chosen)(const std::filesystem::path&, const CommandOptions&) = nullptr;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("file", file, "Scenario or operator document")->required();
    sub->callback([&chosen, fn = e.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }
  if (*out_opt) opt.out = out;
  if (*seed_opt) opt.seed = seed;
  if (*tol_opt) opt.tol = tol;
  if (*grid_opt) opt.grid_n = grid_n;
  return chosen(file, opt);
}
