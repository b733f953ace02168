#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kinetic/discretize.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/htheorem.hpp"
#include "kinetic/oracle.hpp"
#include "kinetic/pawula.hpp"
#include "kinetic/semigroup.hpp"

namespace kinetic {

/// A generator document:
///
///     {
///       "dimension": 1,
///       "a": "1 + x^2",            expression, number or {"nodes": [...], "values": [...]}
///       "b": "-x",                 n-D: "a" is an n x n array, "b" an array of n
///       "domain": {"kind": "full-line", "bounds": [[-10, 10]], "bc": "no-flux"},
///       "gibbs": {"beta": 1, "H": "1.5*ln(1 + x^2)"},   optional
///       "label": "..."                                   optional
///     }
///
/// Domain kinds: full-line, half-line, box. Boundary conditions: no-flux,
/// absorbing.
struct GeneratorDocument {
  GeneratorSpec spec;
  std::optional<GibbsForm> gibbs;
};

/// Throws ParseError (with line and column) for malformed JSON and SchemaError
/// naming the offending field otherwise. `where` prefixes field names.
GeneratorDocument parse_generator(std::string_view json, const std::string& where = "");

/// Canonical JSON (sorted keys, shortest round-trip numbers). Needs the
/// coefficient source; throws SchemaError for specs built from callbacks.
std::string generator_to_json(const GeneratorSpec& spec, const std::optional<GibbsForm>& gibbs = {});

std::string certificate_to_json(const PawulaCertificate& c);

/// One "row col value" line per stored entry, row major.
void write_triplets(std::ostream& os, const SparseMatrix& q);
SparseMatrix read_triplets(std::istream& is, int n);
/// Sidecar document: grid axes, boundary condition, scheme, lambda_max, nnz.
std::string qmatrix_metadata(const DiscreteGenerator& q);

/// 17 significant digits, enough to re-read the exact double.
std::string csv_number(double v);

/// time,node_index,x,value (x2, x3 follow x for higher dimensions).
void write_evolution_csv(std::ostream& os, const EvolutionResult& r);
/// time,mass,min_value,sup_norm
void write_evolution_summary_csv(std::ostream& os, const EvolutionResult& r);
/// time,H,dissipation_rate,boundary_term,max_increase_so_far (missing columns
/// are left empty).
void write_hcurve_csv(std::ostream& os, const HCurve& c);
/// particle_id,x,absorbed
void write_ensemble_csv(std::ostream& os, const ParticleEnsemble& e);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // empty cells read as NaN
};
CsvTable read_csv(std::istream& is);

}  // namespace kinetic
