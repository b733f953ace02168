#include "kinetic/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kinetic/errors.hpp"

namespace kinetic {

using nlohmann::json;

namespace {

std::string field(const std::string& where, const std::string& name) {
  return where.empty() ? name : where + "." + name;
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError("missing field '" + field(where, key) + "'");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError("field '" + path + "' must be a number");
  return v.get<double>();
}

Expression expression(const json& v, const std::string& path) {
  if (v.is_number()) return Expression::constant(v.get<double>());
  if (!v.is_string()) throw SchemaError("field '" + path + "' must be an expression string or a number");
  try {
    return Expression::parse(v.get<std::string>());
  } catch (const ParseError& e) {
    throw SchemaError("field '" + path + "': " + e.what());
  }
}

CoefficientEntry entry(const json& v, const std::string& path) {
  if (v.is_object()) {
    CoefficientTable t;
    const json& nodes = require(v, "nodes", path);
    const json& values = require(v, "values", path);
    if (!nodes.is_array() || !values.is_array() || nodes.size() != values.size() || nodes.size() < 2) {
      throw SchemaError("field '" + path + "' table needs equal length nodes/values arrays (>= 2)");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      t.nodes.push_back(number(nodes[i], path + ".nodes[" + std::to_string(i) + "]"));
      t.values.push_back(number(values[i], path + ".values[" + std::to_string(i) + "]"));
      if (i > 0 && !(t.nodes[i] > t.nodes[i - 1])) throw SchemaError("field '" + path + ".nodes' must increase");
    }
    return t;
  }
  return expression(v, path);
}

json entry_to_json(const CoefficientEntry& e) {
  if (const auto* x = std::get_if<Expression>(&e)) return x->to_string();
  const auto& t = std::get<CoefficientTable>(e);
  return json{{"nodes", t.nodes}, {"values", t.values}};
}

std::string kind_name(DomainKind k) {
  switch (k) {
    case DomainKind::kFullLine: return "full-line";
    case DomainKind::kHalfLine: return "half-line";
    case DomainKind::kBox: return "box";
  }
  return "box";
}

std::string bc_name(BoundaryCondition bc) { return bc == BoundaryCondition::kNoFlux ? "no-flux" : "absorbing"; }

DomainSpec parse_domain(const json& d, const std::string& path) {
  DomainSpec out;
  const std::string kind = require(d, "kind", path).is_string() ? d.at("kind").get<std::string>() : "";
  if (kind == "full-line") {
    out.kind = DomainKind::kFullLine;
  } else if (kind == "half-line") {
    out.kind = DomainKind::kHalfLine;
  } else if (kind == "box") {
    out.kind = DomainKind::kBox;
  } else {
    throw SchemaError("field '" + path + ".kind' must be full-line, half-line or box");
  }
  const json& bounds = require(d, "bounds", path);
  if (!bounds.is_array() || bounds.empty()) throw SchemaError("field '" + path + ".bounds' must be a non-empty array");
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const std::string p = path + ".bounds[" + std::to_string(i) + "]";
    if (!bounds[i].is_array() || bounds[i].size() != 2) throw SchemaError("field '" + p + "' must be [lo, hi]");
    out.bounds.emplace_back(number(bounds[i][0], p + "[0]"), number(bounds[i][1], p + "[1]"));
  }
  if (d.contains("bc")) {
    const std::string bc = d.at("bc").is_string() ? d.at("bc").get<std::string>() : "";
    if (bc == "no-flux") {
      out.boundary_condition = BoundaryCondition::kNoFlux;
    } else if (bc == "absorbing") {
      out.boundary_condition = BoundaryCondition::kAbsorbing;
    } else {
      throw SchemaError("field '" + path + ".bc' must be no-flux or absorbing");
    }
  }
  try {
    out.validate();
  } catch (const DomainError& e) {
    throw SchemaError("field '" + path + "': " + e.what());
  }
  return out;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
}

}  // namespace

GeneratorDocument parse_generator(std::string_view text, const std::string& where) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw SchemaError("generator document must be an object");
  const int n = doc.contains("dimension") ? static_cast<int>(number(doc.at("dimension"), field(where, "dimension"))) : 1;
  if (n < 1 || n > kMaxDimension) throw SchemaError("field '" + field(where, "dimension") + "' must be 1, 2 or 3");
  const DomainSpec domain = parse_domain(require(doc, "domain", where), field(where, "domain"));
  if (domain.dimension() != n) throw SchemaError("field '" + field(where, "domain.bounds") + "' must have one entry per dimension");

  CoefficientSource src;
  const json& a = require(doc, "a", where);
  const json& b = require(doc, "b", where);
  if (n == 1 && !a.is_array()) {
    src.a = {{entry(a, field(where, "a"))}};
  } else {
    if (!a.is_array() || static_cast<int>(a.size()) != n) throw SchemaError("field '" + field(where, "a") + "' must be an n x n array");
    for (int i = 0; i < n; ++i) {
      if (!a[i].is_array() || static_cast<int>(a[i].size()) != n) {
        throw SchemaError("field '" + field(where, "a") + "[" + std::to_string(i) + "]' must have n entries");
      }
      src.a.emplace_back();
      for (int j = 0; j < n; ++j) {
        src.a.back().push_back(entry(a[i][j], field(where, "a") + "[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
      }
    }
  }
  if (n == 1 && !b.is_array()) {
    src.b = {entry(b, field(where, "b"))};
  } else {
    if (!b.is_array() || static_cast<int>(b.size()) != n) throw SchemaError("field '" + field(where, "b") + "' must be an array of n entries");
    for (int i = 0; i < n; ++i) src.b.push_back(entry(b[i], field(where, "b") + "[" + std::to_string(i) + "]"));
  }
  const std::string label = doc.contains("label") && doc.at("label").is_string() ? doc.at("label").get<std::string>() : "";
  GeneratorDocument out{GeneratorSpec::from_source(std::move(src), domain, label), std::nullopt};
  if (doc.contains("gibbs")) {
    const json& g = doc.at("gibbs");
    const std::string p = field(where, "gibbs");
    GibbsForm gibbs;
    gibbs.beta = number(require(g, "beta", p), p + ".beta");
    if (!(gibbs.beta > 0.0)) throw SchemaError("field '" + p + ".beta' must be positive");
    gibbs.energy = expression(require(g, "H", p), p + ".H");
    out.gibbs = gibbs;
  }
  return out;
}

std::string generator_to_json(const GeneratorSpec& spec, const std::optional<GibbsForm>& gibbs) {
  if (!spec.source) throw SchemaError("generator built from callbacks has no document form");
  const CoefficientSource& src = *spec.source;
  json doc;
  doc["dimension"] = spec.dimension;
  if (spec.dimension == 1) {
    doc["a"] = entry_to_json(src.a[0][0]);
    doc["b"] = entry_to_json(src.b[0]);
  } else {
    json a = json::array();
    for (const auto& row : src.a) {
      json r = json::array();
      for (const auto& e : row) r.push_back(entry_to_json(e));
      a.push_back(r);
    }
    json b = json::array();
    for (const auto& e : src.b) b.push_back(entry_to_json(e));
    doc["a"] = a;
    doc["b"] = b;
  }
  json bounds = json::array();
  for (const auto& [lo, hi] : spec.domain.bounds) bounds.push_back({lo, hi});
  doc["domain"] = {{"kind", kind_name(spec.domain.kind)}, {"bounds", bounds}, {"bc", bc_name(spec.domain.boundary_condition)}};
  if (gibbs) doc["gibbs"] = {{"beta", gibbs->beta}, {"H", gibbs->energy.to_string()}};
  if (!spec.label.empty()) doc["label"] = spec.label;
  return doc.dump(2);
}

std::string certificate_to_json(const PawulaCertificate& c) {
  json doc;
  doc["kind"] = c.kind == PawulaCertificate::Kind::kHigherOrder ? "higher-order" : "indefinite-diffusion";
  doc["x0"] = std::vector<double>(c.x0.data(), c.x0.data() + c.x0.size());
  doc["epsilon"] = c.epsilon;
  doc["amplitude"] = c.amplitude;
  doc["index"] = c.index;
  doc["order"] = c.order;
  doc["value"] = c.value;
  doc["validity_radius"] = std::isfinite(c.validity_radius) ? json(c.validity_radius) : json("inf");
  json terms = json::array();
  for (const auto& [e, coef] : c.g.terms()) terms.push_back({{"exponent", e}, {"coefficient", coef}});
  doc["g"] = {{"center", doc["x0"]}, {"terms", terms}, {"text", c.g.to_string()}};
  return doc.dump(2);
}

void write_triplets(std::ostream& os, const SparseMatrix& q) {
  for (int i = 0; i < q.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      os << i << ' ' << it.col() << ' ' << csv_number(it.value()) << '\n';
    }
  }
}

SparseMatrix read_triplets(std::istream& is, int n) {
  std::vector<Eigen::Triplet<double>> t;
  int i = 0;
  int j = 0;
  std::string v;
  while (is >> i >> j >> v) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw ParseError("triplet index out of range");
    t.emplace_back(i, j, std::stod(v));
  }
  SparseMatrix q(n, n);
  q.setFromTriplets(t.begin(), t.end());
  q.makeCompressed();
  return q;
}

std::string qmatrix_metadata(const DiscreteGenerator& q) {
  json axes = json::array();
  for (const Axis& a : q.grid.axes()) axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"nodes", a.nodes}});
  json doc;
  doc["grid"] = {{"axes", axes}, {"bc", bc_name(q.grid.boundary_condition())}};
  doc["scheme"] = to_string(q.scheme);
  doc["lambda_max"] = q.lambda_max;
  doc["size"] = q.size();
  doc["nonzeros"] = q.q.nonZeros();
  return doc.dump(2);
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_evolution_csv(std::ostream& os, const EvolutionResult& r) {
  const int n = r.fields.empty() ? 1 : r.fields.front().grid.dimension();
  os << "time,node_index,x";
  for (int d = 1; d < n; ++d) os << ",x" << d + 1;
  os << ",value\n";
  for (std::size_t k = 0; k < r.fields.size(); ++k) {
    const ScalarField& f = r.fields[k];
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec x = f.grid.coordinate(i);
      os << csv_number(r.times[k]) << ',' << i;
      for (int d = 0; d < n; ++d) os << ',' << csv_number(x(d));
      os << ',' << csv_number(f[i]) << '\n';
    }
  }
}

void write_evolution_summary_csv(std::ostream& os, const EvolutionResult& r) {
  os << "time,mass,min_value,sup_norm\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    os << csv_number(r.times[k]) << ',' << csv_number(r.mass[k]) << ',' << csv_number(r.min_value[k]) << ','
       << csv_number(r.sup_norm[k]) << '\n';
  }
}

void write_hcurve_csv(std::ostream& os, const HCurve& c) {
  os << "time,H,dissipation_rate,boundary_term,max_increase_so_far\n";
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    os << csv_number(c.times[k]) << ',' << csv_number(c.h[k]) << ',';
    if (k < c.dissipation.size()) os << csv_number(c.dissipation[k]);
    os << ',';
    if (k < c.boundary.size()) os << csv_number(c.boundary[k]);
    os << ',' << csv_number(c.max_increase_so_far[k]) << '\n';
  }
}

void write_ensemble_csv(std::ostream& os, const ParticleEnsemble& e) {
  os << "particle_id,x";
  for (int d = 1; d < e.dimension; ++d) os << ",x" << d + 1;
  os << ",absorbed\n";
  for (std::size_t p = 0; p < e.count(); ++p) {
    os << p;
    for (int d = 0; d < e.dimension; ++d) {
      os << ',' << csv_number(e.positions[p * static_cast<std::size_t>(e.dimension) + static_cast<std::size_t>(d)]);
    }
    os << ',' << static_cast<int>(e.absorbed[p]) << '\n';
  }
}

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(is, line)) return t;
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& c : split(line)) row.push_back(c.empty() ? std::nan("") : std::stod(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace kinetic
