#include "kinetic/htheorem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kinetic/errors.hpp"
#include "kinetic/markov_elimination.hpp"

namespace kinetic {

std::string to_string(HKind k) {
  switch (k) {
    case HKind::kXLogX: return "xlogx";
    case HKind::kSquare: return "square";
    case HKind::kAbsDev: return "abs-dev";
    case HKind::kSquareDev: return "square-dev";
    case HKind::kCustomTable: return "custom-table";
  }
  return "square";
}

HKind h_kind_from_string(const std::string& s) {
  if (s == "xlogx") return HKind::kXLogX;
  if (s == "square") return HKind::kSquare;
  if (s == "abs-dev") return HKind::kAbsDev;
  if (s == "square-dev") return HKind::kSquareDev;
  if (s == "custom-table") return HKind::kCustomTable;
  throw SchemaError("unknown h-functional kind '" + s + "'");
}

HFunctional HFunctional::table(std::vector<double> nodes, std::vector<double> values) {
  if (nodes.size() < 2 || nodes.size() != values.size()) {
    throw SchemaError("h table needs at least two (node, value) pairs");
  }
  if (!std::is_sorted(nodes.begin(), nodes.end()) || std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw SchemaError("h table nodes must increase strictly");
  }
  HFunctional h;
  h.kind = HKind::kCustomTable;
  h.nodes = std::move(nodes);
  h.values = std::move(values);
  return h;
}

HFunctional HFunctional::affine(double alpha, double c) const {
  if (!(alpha > 0.0)) throw PreconditionViolated("h can only be scaled by a positive factor");
  HFunctional h = *this;
  h.scale *= alpha;
  h.offset = alpha * offset + c;
  return h;
}

namespace {

double table_value(const std::vector<double>& xs, const std::vector<double>& ys, double u) {
  std::size_t k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), u) - xs.begin());
  k = std::clamp<std::size_t>(k, 1, xs.size() - 1);
  const double t = (u - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

}  // namespace

double HFunctional::operator()(double u) const {
  double base = 0.0;
  switch (kind) {
    case HKind::kXLogX: base = u > 0.0 ? u * std::log(u) : 0.0; break;
    case HKind::kSquare: base = u * u; break;
    case HKind::kAbsDev: base = std::abs(u - center); break;
    case HKind::kSquareDev: base = (u - center) * (u - center); break;
    case HKind::kCustomTable: base = table_value(nodes, values, u); break;
  }
  return scale * base + offset;
}

double HFunctional::first_derivative(double u) const {
  switch (kind) {
    case HKind::kXLogX: return scale * (std::log(u) + 1.0);
    case HKind::kSquare: return scale * 2.0 * u;
    case HKind::kSquareDev: return scale * 2.0 * (u - center);
    default: throw NonSmoothH(to_string(kind) + " has no derivative everywhere");
  }
}

double HFunctional::second_derivative(double u) const {
  switch (kind) {
    case HKind::kXLogX: return scale / u;
    case HKind::kSquare:
    case HKind::kSquareDev: return scale * 2.0;
    default: throw NonSmoothH(to_string(kind) + " has no second derivative");
  }
}

double HFunctional::convexity_floor(double probe_max) const {
  const int n = 1000;
  const double du = probe_max / (n - 1);
  double floor = 0.0;
  for (int i = 1; i + 1 < n; ++i) {
    const double u = i * du;
    const double d2 = (*this)(u + du) - 2.0 * (*this)(u) + (*this)(u - du);
    floor = std::min(floor, d2);
  }
  return floor;
}

void HFunctional::validate() const {
  if (!(scale > 0.0)) throw PreconditionViolated("h scale must be positive");
  if (convexity_floor() < -1e-12) throw PreconditionViolated("h is not convex on the probe grid");
}

std::string HFunctional::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind);
  if (kind == HKind::kAbsDev || kind == HKind::kSquareDev) os << "(c=" << center << ")";
  if (scale != 1.0) os << "*" << scale;
  if (offset != 0.0) os << (offset > 0 ? "+" : "") << offset;
  return os.str();
}

// ------------------------------------------------------------- invariant ---

InvariantSolution solve_invariant(const DiscreteGenerator& q) {
  if (max_row_sum(q.q) > 1e-10) throw PreconditionViolated("Q rows must sum to zero");
  const std::vector<ClosedClass> classes = closed_classes(q.q);
  const bool all_traps = std::all_of(classes.begin(), classes.end(), [](const ClosedClass& c) { return c.trap; });
  if (classes.empty() || all_traps) {
    throw NoInvariantDensity("every closed class is an absorbing state; no invariant density exists");
  }
  InvariantSolution out;
  const double w = q.grid.weight();
  for (const ClosedClass& c : classes) {
    ScalarField f(q.grid, 0.0);
    for (std::size_t k = 0; k < c.states.size(); ++k) f[static_cast<std::size_t>(c.states[k])] = c.stationary[k] / w;
    out.basis.push_back(std::move(f));
  }
  out.unique = classes.size() == 1;
  out.pi = out.basis.front();
  return out;
}

// ----------------------------------------------------------- H function ---

double h_function(const ScalarField& rho, const ScalarField& nu, const HFunctional& h) {
  if (rho.size() != nu.size()) throw ShapeError("density lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] > 0.0) {
      s += h(nu[i] / rho[i]) * rho[i];
    } else if (nu[i] > 0.0) {
      throw SupportViolation("density is positive at node " + std::to_string(i) + " where the reference vanishes");
    }
  }
  return s * rho.grid.weight();
}

double h_function(const EquilibriumDensity& rho, const ScalarField& nu, const HFunctional& h) {
  return h_function(rho.field, nu, h);
}

ScalarField relative_density(const ScalarField& nu, const ScalarField& rho) {
  if (rho.size() != nu.size()) throw ShapeError("density lengths differ");
  ScalarField phi(nu.grid, 0.0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (rho[i] > 0.0) {
      phi[i] = nu[i] / rho[i];
    } else if (nu[i] > 0.0) {
      throw SupportViolation("density is positive at node " + std::to_string(i) + " where the reference vanishes");
    }
  }
  return phi;
}

double dissipation_rate(const GeneratorSpec& spec, const ScalarField& rho0, const ScalarField& phi,
                        const HFunctional& h) {
  if (!h.has_second_derivative()) throw NonSmoothH(to_string(h.kind) + " has no second derivative");
  if (rho0.size() != phi.size()) throw ShapeError("field lengths differ");
  const Grid& g = phi.grid;
  const int n = g.dimension();
  double s = 0.0;
  Vec grad(n);
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (int d = 0; d < n; ++d) grad(d) = axis_derivative(g, phi.values, k, d);
    const double form = grad.dot(spec.a(g.coordinate(k)) * grad);
    if (form == 0.0 || rho0[k] == 0.0) continue;
    s += rho0[k] * h.second_derivative(phi[k]) * form;
  }
  return -s * g.weight();
}

double boundary_term(const GeneratorSpec& spec, const EquilibriumDensity& rho0, const ScalarField& phi,
                     const HFunctional& h) {
  const Grid& g = phi.grid;
  const int n = g.dimension();
  const std::vector<ScalarField> hi = compute_Hi(spec, rho0);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.on_boundary(k)) continue;
    const std::vector<int> idx = g.multi_index(k);
    for (int d = 0; d < n; ++d) {
      const int i = idx[static_cast<std::size_t>(d)];
      const int last = g.axis(d).nodes - 1;
      if (i != 0 && i != last) continue;
      const double sp = g.axis(d).spacing();
      const std::size_t s = g.stride(d);
      const std::size_t k1 = i == 0 ? k + s : k - s;
      const std::size_t k2 = i == 0 ? k + 2 * s : k - 2 * s;
      // Quadratic through nodes 0, 1, 2 evaluated at -1/2.
      auto at_wall = [&](const std::vector<double>& v) { return (15.0 * v[k] - 10.0 * v[k1] + 3.0 * v[k2]) / 8.0; };
      const double slope = (-2.0 * phi[k] + 3.0 * phi[k1] - phi[k2]) / sp;
      Vec xw = g.coordinate(k);
      xw(d) += i == 0 ? -0.5 * sp : 0.5 * sp;
      const double pw = at_wall(phi.values);
      const double hp = slope == 0.0 ? 0.0 : h.first_derivative(pw) * slope;
      const double v = at_wall(rho0.field.values) * spec.a(xw)(d, d) * hp +
                       h(pw) * at_wall(hi[static_cast<std::size_t>(d)].values);
      worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

// ---------------------------------------------------------------- curves ---

HCurve h_curve(const EvolutionResult& evolution, const ScalarField& reference, const HFunctional& h, double tol,
               const HCurveDiagnostics& diagnostics) {
  HCurve c;
  c.tolerance = tol;
  c.times = evolution.times;
  double running = 0.0;
  for (std::size_t k = 0; k < evolution.fields.size(); ++k) {
    const ScalarField& nu = evolution.fields[k];
    c.h.push_back(h_function(reference, nu, h));
    if (k > 0) running = std::max(running, c.h[k] - c.h[k - 1]);
    c.max_increase_so_far.push_back(running);
    if (diagnostics.spec && diagnostics.rho0) {
      const ScalarField phi = relative_density(nu, diagnostics.rho0->field);
      if (h.has_second_derivative()) {
        c.dissipation.push_back(dissipation_rate(*diagnostics.spec, diagnostics.rho0->field, phi, h));
        c.boundary.push_back(boundary_term(*diagnostics.spec, *diagnostics.rho0, phi, h));
      }
    }
  }
  c.max_increase = running;
  return c;
}

HCurve h_curve(const DiscreteGenerator& q, const ScalarField& nu0, const HFunctional& h,
               const std::vector<double>& times, double tol, const std::optional<ScalarField>& reference,
               const HCurveDiagnostics& diagnostics) {
  const ScalarField ref = reference ? *reference : solve_invariant(q).pi;
  UniformizationOptions opt;
  opt.tol = std::min(tol, 1e-6);
  return h_curve(evolve_density(q, nu0, times, opt), ref, h, tol, diagnostics);
}

DissipationCheck dH_dt_consistency(const DiscreteGenerator& q, const GeneratorSpec& spec,
                                   const EquilibriumDensity& rho0, const ScalarField& nu0, const HFunctional& h,
                                   double t, double dt, const UniformizationOptions& opt) {
  if (!(dt > 0.0) || t - dt < 0.0) throw TimeError("need 0 < dt <= t");
  const EvolutionResult ev = evolve_density(q, nu0, {t - dt, t, t + dt}, opt);
  DissipationCheck r;
  r.slope = (h_function(rho0, ev.fields[2], h) - h_function(rho0, ev.fields[0], h)) / (2.0 * dt);
  const ScalarField phi = relative_density(ev.fields[1], rho0.field);
  r.rate = dissipation_rate(spec, rho0.field, phi, h);
  r.boundary = boundary_term(spec, rho0, phi, h);
  r.density = ev.fields[1];
  if (std::abs(r.rate) < 1e-14 && std::abs(r.slope) < 1e-14) {
    r.relative_gap = 0.0;
  } else {
    r.relative_gap = std::abs(r.slope - r.rate) / std::abs(r.rate);
  }
  return r;
}

}  // namespace kinetic
