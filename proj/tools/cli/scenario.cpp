#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kinetic/errors.hpp"
#include "kinetic/serialize.hpp"

namespace kinetic::cli {

using nlohmann::json;

namespace {

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

double number(const json& obj, const std::string& key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) throw SchemaError("field '" + path + "." + key + "' must be a number");
  return obj.at(key).get<double>();
}

double required_number(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw SchemaError("missing field '" + path + "." + key + "'");
  return number(obj, key, path, 0.0);
}

double positive(const json& obj, const std::string& key, const std::string& path, double fallback) {
  const double v = number(obj, key, path, fallback);
  if (!(v > 0.0)) throw SchemaError("field '" + path + "." + key + "' must be positive");
  return v;
}

std::uint64_t count(const json& obj, const std::string& key, const std::string& path, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw SchemaError("field '" + path + "." + key + "' must be a positive integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(const json& obj, const std::string& key, const std::string& path, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) throw SchemaError("field '" + path + "." + key + "' must be a string");
  return obj.at(key).get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError("field '" + path + "' must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw SchemaError("field '" + path + "[" + std::to_string(i) + "]' must be a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

Vec vec_of(const json& v, const std::string& path) {
  const std::vector<double> xs = v.is_number() ? std::vector<double>{v.get<double>()} : numbers(v, path);
  if (xs.empty() || static_cast<int>(xs.size()) > kMaxDimension) throw SchemaError("field '" + path + "' must be a point");
  Vec out(static_cast<int>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) out(static_cast<int>(i)) = xs[i];
  return out;
}

Equilibrium gibbs_equilibrium(const GibbsForm& g, int dimension) {
  Equilibrium eq;
  eq.expression = exp(Expression::constant(-g.beta) * g.energy);
  eq.density = SmoothFunction::from_expression(eq.expression, dimension);
  eq.gibbs = g;
  return eq;
}

struct GeneratorReference {
  GeneratorSpec spec;
  std::optional<Equilibrium> equilibrium;
  std::string origin;
};

GeneratorReference parse_generator_reference(const json& g, const std::filesystem::path& base, const std::string& path) {
  if (!g.is_object()) throw SchemaError("field '" + path + "' must be an object");
  if (g.contains("catalog")) {
    const std::string name = text(g, "catalog", path, "");
    const double alpha = number(g, "alpha", path, 1.0);
    CatalogExample ex;
    try {
      ex = catalog_example(name, alpha);
    } catch (const Error& e) {
      throw SchemaError("field '" + path + ".catalog': " + e.what());
    }
    GeneratorSpec spec = ex.spec;
    if (g.contains("bounds") || g.contains("bc")) {
      json d{{"kind", "box"}, {"bounds", json::array()}};
      for (const auto& [lo, hi] : spec.domain.bounds) d["bounds"].push_back({lo, hi});
      if (g.contains("bounds")) d["bounds"] = g.at("bounds");
      d["bc"] = spec.domain.boundary_condition == BoundaryCondition::kNoFlux ? "no-flux" : "absorbing";
      if (g.contains("bc")) d["bc"] = g.at("bc");
      // Reuse the document parser for the domain rules, then keep the
      // catalogued coefficients.
      const json doc{{"a", 0}, {"b", 0}, {"domain", d}, {"dimension", spec.dimension}};
      DomainSpec dom = parse_generator(doc.dump(), path).spec.domain;
      dom.kind = spec.domain.kind;
      try {
        dom.validate();
      } catch (const DomainError& e) {
        throw SchemaError("field '" + path + ".bounds': " + e.what());
      }
      spec.domain = dom;
    }
    std::ostringstream origin;
    origin << "catalog:" << name << "(alpha=" << alpha << ")";
    return {spec, ex.equilibrium, origin.str()};
  }
  if (g.contains("file")) {
    const std::filesystem::path f = base / text(g, "file", path, "");
    const GeneratorDocument doc = parse_generator(read_file(f), path);
    std::optional<Equilibrium> eq;
    if (doc.gibbs) eq = gibbs_equilibrium(*doc.gibbs, doc.spec.dimension);
    return {doc.spec, eq, "file:" + f.filename().string()};
  }
  const GeneratorDocument doc = parse_generator(g.dump(), path);
  std::optional<Equilibrium> eq;
  if (doc.gibbs) eq = gibbs_equilibrium(*doc.gibbs, doc.spec.dimension);
  return {doc.spec, eq, "inline"};
}

HFunctional parse_h(const json& v, const std::string& path) {
  try {
    if (v.is_string()) {
      const HKind k = h_kind_from_string(v.get<std::string>());
      switch (k) {
        case HKind::kXLogX: return HFunctional::xlogx();
        case HKind::kSquare: return HFunctional::square();
        case HKind::kAbsDev: return HFunctional::abs_dev();
        case HKind::kSquareDev: return HFunctional::square_dev();
        case HKind::kCustomTable: throw SchemaError("custom-table needs nodes and values");
      }
    }
    if (!v.is_object()) throw SchemaError("must be a kind name or an object");
    const HKind k = h_kind_from_string(text(v, "kind", path, ""));
    const double c = number(v, "center", path, 1.0);
    HFunctional h;
    switch (k) {
      case HKind::kXLogX: h = HFunctional::xlogx(); break;
      case HKind::kSquare: h = HFunctional::square(); break;
      case HKind::kAbsDev: h = HFunctional::abs_dev(c); break;
      case HKind::kSquareDev: h = HFunctional::square_dev(c); break;
      case HKind::kCustomTable:
        if (!v.contains("nodes") || !v.contains("values")) throw SchemaError("custom-table needs nodes and values");
        h = HFunctional::table(numbers(v.at("nodes"), path + ".nodes"), numbers(v.at("values"), path + ".values"));
        break;
    }
    h = h.affine(positive(v, "scale", path, 1.0), number(v, "offset", path, 0.0));
    h.validate();
    return h;
  } catch (const SchemaError& e) {
    throw SchemaError("field '" + path + "': " + e.what());
  } catch (const PreconditionViolated& e) {
    throw SchemaError("field '" + path + "': " + e.what());
  }
}

std::vector<double> parse_times(const json& v, const std::string& path) {
  std::vector<double> t;
  if (v.is_array()) {
    t = numbers(v, path);
  } else if (v.is_object()) {
    const double end = positive(v, "end", path, 1.0);
    const std::uint64_t samples = count(v, "samples", path, 100);
    for (std::uint64_t k = 0; k <= samples; ++k) t.push_back(end * static_cast<double>(k) / static_cast<double>(samples));
  } else {
    throw SchemaError("field '" + path + "' must be an array or {end, samples}");
  }
  if (t.empty()) throw SchemaError("field '" + path + "' is empty");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0.0) || (i > 0 && !(t[i] > t[i - 1]))) {
      throw SchemaError("field '" + path + "' must be non-negative and strictly increasing");
    }
  }
  return t;
}

InitialDescriptor parse_initial(const json& v, const std::string& path) {
  if (!v.is_object()) throw SchemaError("field '" + path + "' must be an object");
  InitialDescriptor d;
  d.kind = text(v, "kind", path, "gaussian");
  if (d.kind == "gaussian") {
    d.mean = number(v, "mean", path, 0.0);
    d.sd = positive(v, "sd", path, 1.0);
    d.truncate = positive(v, "truncate", path, std::numeric_limits<double>::infinity());
  } else if (d.kind == "bump") {
    d.center = number(v, "center", path, 0.0);
    d.radius = positive(v, "radius", path, 1.0);
  } else if (d.kind == "uniform") {
    d.lo = required_number(v, "lo", path);
    d.hi = required_number(v, "hi", path);
    if (!(d.lo < d.hi)) throw SchemaError("field '" + path + "' needs lo < hi");
  } else if (d.kind == "delta") {
    d.x = number(v, "x", path, 0.0);
  } else if (d.kind != "equilibrium") {
    throw SchemaError("field '" + path + ".kind' must be gaussian, bump, uniform, delta or equilibrium");
  }
  return d;
}

OracleSettings parse_oracle(const json& v, const std::string& path) {
  if (!v.is_object()) throw SchemaError("field '" + path + "' must be an object");
  OracleSettings o;
  o.particles = count(v, "particles", path, o.particles);
  o.dt = positive(v, "dt", path, o.dt);
  o.seed = v.contains("seed") ? count(v, "seed", path, 1) : o.seed;
  o.threads = static_cast<int>(count(v, "threads", path, 1));
  if (v.contains("snapshots")) o.snapshots = parse_times(v.at("snapshots"), path + ".snapshots");
  o.budget = positive(v, "budget", path, o.budget);
  if (v.contains("moment_points")) o.moment_points = numbers(v.at("moment_points"), path + ".moment_points");
  o.moment_t = positive(v, "moment_t", path, o.moment_t);
  o.moment_particles = count(v, "moment_particles", path, o.moment_particles);
  return o;
}

}  // namespace

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + file.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<EquilibriumDensity> Scenario::reference_density(const Grid& g) const {
  if (!equilibrium) return std::nullopt;
  return normalize_on_grid(sample_equilibrium(*equilibrium, g));
}

Scenario parse_scenario(std::string_view body, const std::filesystem::path& base) {
  const json doc = parse_json(body);
  if (!doc.is_object()) throw SchemaError("scenario document must be an object");
  Scenario s;
  s.name = text(doc, "name", "scenario", "scenario");
  if (!doc.contains("generator")) throw SchemaError("missing field 'generator'");
  GeneratorReference g = parse_generator_reference(doc.at("generator"), base, "generator");
  s.spec = std::move(g.spec);
  s.equilibrium = std::move(g.equilibrium);
  s.generator_origin = g.origin;

  if (doc.contains("grid")) {
    const json& grid = doc.at("grid");
    if (!grid.is_object()) throw SchemaError("field 'grid' must be an object");
    const std::uint64_t n = count(grid, "nodes", "grid", 401);
    if (n < 3 || n > 1'000'000) throw SchemaError("field 'grid.nodes' must lie in [3, 1e6]");
    s.grid_nodes = static_cast<int>(n);
  }
  try {
    s.scheme = scheme_from_string(text(doc, "scheme", "scenario", "exponential-fitting"));
  } catch (const Error& e) {
    throw SchemaError(std::string("field 'scheme': ") + e.what());
  }
  if (s.scheme == Scheme::kCustom) throw SchemaError("field 'scheme' must be exponential-fitting or upwind");
  if (doc.contains("initial")) s.initial = parse_initial(doc.at("initial"), "initial");
  if (doc.contains("h")) {
    const json& h = doc.at("h");
    if (!h.is_array()) throw SchemaError("field 'h' must be an array");
    for (std::size_t i = 0; i < h.size(); ++i) s.h.push_back(parse_h(h[i], "h[" + std::to_string(i) + "]"));
  } else {
    s.h = {HFunctional::xlogx(), HFunctional::square(), HFunctional::square_dev()};
  }
  s.times = doc.contains("times") ? parse_times(doc.at("times"), "times") : parse_times(json{{"end", 1.0}, {"samples", 10}}, "times");

  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    if (!t.is_object()) throw SchemaError("field 'tolerances' must be an object");
    s.tol.uniformization = positive(t, "uniformization", "tolerances", s.tol.uniformization);
    if (s.tol.uniformization > 1e-6) throw SchemaError("field 'tolerances.uniformization' must lie in (0, 1e-6]");
    s.tol.positivity = positive(t, "positivity", "tolerances", s.tol.positivity);
    s.tol.mass = positive(t, "mass", "tolerances", s.tol.mass);
    s.tol.monotone = positive(t, "monotone", "tolerances", s.tol.monotone);
    s.tol.residual = positive(t, "residual", "tolerances", s.tol.residual);
    if (t.contains("invariant_l1")) s.tol.invariant_l1 = positive(t, "invariant_l1", "tolerances", 0.01);
    if (t.contains("dissipation_gap")) s.tol.dissipation_gap = positive(t, "dissipation_gap", "tolerances", 0.02);
  }
  if (doc.contains("invariant")) {
    const json& inv = doc.at("invariant");
    if (!inv.is_object() || (inv.contains("required") && !inv.at("required").is_boolean())) {
      throw SchemaError("field 'invariant' must be {\"required\": true|false}");
    }
    s.require_invariant = inv.value("required", true);
  }
  if (doc.contains("checks")) {
    const json& c = doc.at("checks");
    if (!c.is_object()) throw SchemaError("field 'checks' must be an object");
    if (c.contains("chapman_kolmogorov")) {
      const json& ck = c.at("chapman_kolmogorov");
      s.chapman_kolmogorov = std::make_pair(positive(ck, "t", "checks.chapman_kolmogorov", 0.3),
                                            positive(ck, "s", "checks.chapman_kolmogorov", 0.7));
    }
    if (c.contains("dissipation_dt")) s.dissipation_dt = positive(c, "dissipation_dt", "checks", 1e-3);
    if (c.contains("export_qmatrix")) {
      if (!c.at("export_qmatrix").is_boolean()) throw SchemaError("field 'checks.export_qmatrix' must be a boolean");
      s.export_qmatrix = c.at("export_qmatrix").get<bool>();
    }
  }
  if (doc.contains("oracle")) s.oracle = parse_oracle(doc.at("oracle"), "oracle");
  s.output = text(doc, "output", "scenario", "");
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  Scenario s = parse_scenario(read_file(file), file.parent_path());
  s.source = file;
  return s;
}

ScalarField initial_density(const InitialDescriptor& d, const Grid& grid, const ScalarField* pi) {
  if (grid.dimension() != 1 && d.kind != "equilibrium" && d.kind != "uniform") {
    throw SchemaError("initial density kind '" + d.kind + "' is 1-D only");
  }
  ScalarField f(grid, 0.0);
  if (d.kind == "equilibrium") {
    if (!pi) throw PreconditionViolated("equilibrium start needs the invariant law");
    f = *pi;
  } else if (d.kind == "delta") {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (std::abs(grid.x(i) - d.x) < std::abs(grid.x(best) - d.x)) best = i;
    }
    f[best] = 1.0;
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Vec x = grid.coordinate(i);
      if (d.kind == "gaussian") {
        const double z = (x(0) - d.mean) / d.sd;
        f[i] = std::abs(z) <= d.truncate ? std::exp(-0.5 * z * z) : 0.0;
      } else if (d.kind == "bump") {
        const double u = (x(0) - d.center) / d.radius;
        f[i] = std::abs(u) < 1.0 ? std::pow(1.0 - u * u, 2) : 0.0;
      } else {
        bool inside = true;
        for (int k = 0; k < x.size(); ++k) inside = inside && x(k) >= d.lo && x(k) <= d.hi;
        f[i] = inside ? 1.0 : 0.0;
      }
    }
  }
  const double m = f.integral();
  if (!(m > 0.0)) throw SchemaError("initial density has no mass on the grid");
  for (double& v : f.values) v /= m;
  return f;
}

OperatorDocument parse_operator(std::string_view body, const std::filesystem::path& base) {
  const json doc = parse_json(body);
  if (!doc.is_object()) throw SchemaError("operator document must be an object");
  OperatorDocument out;
  int dim = 1;
  std::optional<DomainSpec> domain;
  if (doc.contains("generator")) {
    GeneratorReference g = parse_generator_reference(doc.at("generator"), base, "generator");
    out.op = TruncatedOperator::from_generator(g.spec);
    out.origin = g.origin;
    dim = g.spec.dimension;
    domain = g.spec.domain;
  } else if (doc.contains("coefficients")) {
    const json& c = doc.at("coefficients");
    if (!c.is_array()) throw SchemaError("field 'coefficients' must be an array");
    if (c.empty()) throw SchemaError("field 'coefficients' is empty");
    std::vector<Expression> es;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const std::string p = "coefficients[" + std::to_string(i) + "]";
      if (c[i].is_number()) {
        es.push_back(Expression::constant(c[i].get<double>()));
      } else if (c[i].is_string()) {
        try {
          es.push_back(Expression::parse(c[i].get<std::string>()));
        } catch (const ParseError& e) {
          throw SchemaError("field '" + p + "': " + e.what());
        }
      } else {
        throw SchemaError("field '" + p + "' must be an expression string or a number");
      }
    }
    out.op = TruncatedOperator::from_expressions(es);
    out.origin = "coefficients";
  } else if (doc.contains("terms")) {
    dim = static_cast<int>(count(doc, "dimension", "operator", 1));
    if (dim > kMaxDimension) throw SchemaError("field 'dimension' must be 1, 2 or 3");
    const json& t = doc.at("terms");
    if (!t.is_array() || t.empty()) throw SchemaError("field 'terms' must be a non-empty array");
    out.op.dimension = dim;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string p = "terms[" + std::to_string(i) + "]";
      if (!t[i].is_object() || !t[i].contains("index") || !t[i].contains("c")) {
        throw SchemaError("field '" + p + "' needs index and c");
      }
      MultiIndex alpha;
      for (double a : numbers(t[i].at("index"), p + ".index")) alpha.push_back(static_cast<int>(a));
      if (!t[i].at("c").is_number() && !t[i].at("c").is_string()) {
        throw SchemaError("field '" + p + ".c' must be an expression string or a number");
      }
      Expression e;
      try {
        e = t[i].at("c").is_number() ? Expression::constant(t[i].at("c").get<double>())
                                     : Expression::parse(t[i].at("c").get<std::string>());
      } catch (const Error& err) {
        throw SchemaError("field '" + p + ".c': " + err.what());
      }
      out.op.terms[alpha] = [e](const Vec& x) { return e(x); };
    }
    out.origin = "terms";
  } else {
    throw SchemaError("operator document needs coefficients, terms or generator");
  }
  try {
    out.op.validate();
  } catch (const SchemaError& e) {
    throw SchemaError(std::string("operator: ") + e.what());
  }

  if (doc.contains("x0")) {
    out.x0 = vec_of(doc.at("x0"), "x0");
    if (out.x0.size() != dim) throw SchemaError("field 'x0' must have one entry per dimension");
  } else {
    out.x0 = Vec::Zero(dim);
    if (domain) {
      for (int i = 0; i < dim; ++i) out.x0(i) = 0.5 * (domain->bounds[i].first + domain->bounds[i].second);
    }
  }
  out.epsilon = positive(doc, "epsilon", "operator", 0.1);
  if (doc.contains("amplitude")) out.amplitude = number(doc, "amplitude", "operator", 0.0);

  double lo = -1.0;
  double hi = 1.0;
  std::uint64_t n = 201;
  if (domain && dim == 1) {
    lo = domain->bounds[0].first;
    hi = domain->bounds[0].second;
  }
  if (doc.contains("points")) {
    const json& p = doc.at("points");
    if (p.is_array()) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        out.points.push_back(vec_of(p[i], "points[" + std::to_string(i) + "]"));
        if (out.points.back().size() != dim) throw SchemaError("field 'points' entries need one coordinate per dimension");
      }
    } else if (p.is_object()) {
      lo = number(p, "lo", "points", lo);
      hi = number(p, "hi", "points", hi);
      n = count(p, "count", "points", n);
      if (!(lo < hi) || n < 2) throw SchemaError("field 'points' needs lo < hi and count >= 2");
    } else {
      throw SchemaError("field 'points' must be an array or {lo, hi, count}");
    }
  }
  if (out.points.empty()) {
    if (dim != 1) {
      out.points.push_back(out.x0);
    } else {
      for (std::uint64_t i = 0; i < n; ++i) {
        out.points.push_back(point(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)));
      }
    }
  }
  return out;
}

}  // namespace kinetic::cli
