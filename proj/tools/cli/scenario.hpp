#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kinetic/discretize.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/htheorem.hpp"
#include "kinetic/pawula.hpp"

namespace kinetic::cli {

/// Starting density. Kinds: gaussian (mean, sd, truncate in sd units),
/// bump ((1 - ((x - center)/radius)^2)^2 inside the radius), uniform (lo, hi),
/// delta (x), equilibrium (the discrete invariant law). Always normalised to
/// unit mass on the grid.
struct InitialDescriptor {
  std::string kind = "gaussian";
  double mean = 0.0;
  double sd = 1.0;
  double truncate = std::numeric_limits<double>::infinity();
  double center = 0.0;
  double radius = 1.0;
  double lo = 0.0;
  double hi = 1.0;
  double x = 0.0;
};

struct Tolerances {
  double uniformization = 1e-12;
  double positivity = 1e-10;  // min density >= -positivity
  double mass = 1e-9;         // |mass(t) - mass(0)|
  double monotone = 1e-10;    // max H increase
  double residual = 1e-10;    // ||Q^T pi|| <= residual ||Q||
  std::optional<double> invariant_l1;  // pi against the analytic equilibrium
  std::optional<double> dissipation_gap;  // |slope - rate| / |rate|
};

struct OracleSettings {
  std::uint64_t particles = 100000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<double> snapshots{0.5, 1.0, 2.0};
  double budget = 0.05;  // L1 between particle histogram and PDE density
  std::vector<double> moment_points;
  double moment_t = 1e-2;
  std::uint64_t moment_particles = 100000;
};

/// One reproducible experiment.
struct Scenario {
  std::string name;
  std::filesystem::path source;
  std::string generator_origin;
  GeneratorSpec spec;
  std::optional<Equilibrium> equilibrium;
  int grid_nodes = 401;
  Scheme scheme = Scheme::kExponentialFitting;
  InitialDescriptor initial;
  std::vector<HFunctional> h;
  std::vector<double> times;
  Tolerances tol;
  bool require_invariant = true;
  std::optional<std::pair<double, double>> chapman_kolmogorov;
  std::optional<double> dissipation_dt;  // dH/dt check at every interior time
  bool export_qmatrix = false;
  std::optional<OracleSettings> oracle;
  std::string output;

  Grid grid() const { return spec.domain.make_grid(grid_nodes); }
  /// Analytic equilibrium sampled on `grid` and normalised on it, if known.
  std::optional<EquilibriumDensity> reference_density(const Grid& grid) const;
};

/// Parses a scenario document. Relative "file" references resolve against
/// `base`. Throws ParseError / SchemaError.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base = {});
Scenario load_scenario(const std::filesystem::path& file);

/// Reads a whole file; throws SchemaError when it cannot be opened.
std::string read_file(const std::filesystem::path& file);

/// Nodal starting density of a scenario (unit mass). `pi` is needed for the
/// equilibrium kind.
ScalarField initial_density(const InitialDescriptor& d, const Grid& grid, const ScalarField* pi = nullptr);

/// Operator document for the pawula command:
///
///     {"coefficients": ["0", "1", "1"], "x0": 0, "epsilon": 0.1, "amplitude": 0.1,
///      "points": {"lo": -1, "hi": 1, "count": 201}}
///
/// or {"terms": [{"index": [1, 2], "c": "1"}], "dimension": 2, ...} or
/// {"generator": <generator or catalog reference>, ...}.
struct OperatorDocument {
  TruncatedOperator op;
  Vec x0;
  double epsilon = 0.1;
  std::optional<double> amplitude;
  std::vector<Vec> points;
  std::string origin;
};

OperatorDocument parse_operator(std::string_view text, const std::filesystem::path& base = {});

}  // namespace kinetic::cli
