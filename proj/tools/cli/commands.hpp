#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace kinetic::cli {

/// Process exit codes. Never conflated: a malformed request is always 2, a
/// well formed request whose object fails a mathematical check is always 1.
enum ExitCode : int { kPass = 0, kInvariantFailure = 1, kInputError = 2 };

/// Command line overrides applied on top of the scenario document.
struct CommandOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> grid_n;
  std::ostream* log = nullptr;  // verdict lines; stdout when null
};

/// discretize -> evolve -> H-curves. Writes evolution.csv,
/// evolution_summary.csv, one hcurve_<k>.csv per h and summary.json.
int cmd_run(const std::filesystem::path& scenario, const CommandOptions& opt);
/// Certificate for order >= 3 or indefinite second order operators, pass
/// verdict otherwise. Writes certificate.json when one exists.
int cmd_pawula(const std::filesystem::path& document, const CommandOptions& opt);
/// Discrete invariant law. Writes invariant.csv.
int cmd_invariant(const std::filesystem::path& scenario, const CommandOptions& opt);
/// H-curves with dissipation and boundary columns.
int cmd_hcurve(const std::filesystem::path& scenario, const CommandOptions& opt);
/// Particle oracle against the PDE path plus the moment table.
int cmd_oracle_compare(const std::filesystem::path& scenario, const CommandOptions& opt);

}  // namespace kinetic::cli
