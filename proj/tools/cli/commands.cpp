#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include <nlohmann/json.hpp>

#include "kinetic/discretize.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/htheorem.hpp"
#include "kinetic/oracle.hpp"
#include "kinetic/pawula.hpp"
#include "kinetic/semigroup.hpp"
#include "kinetic/serialize.hpp"
#include "scenario.hpp"

namespace kinetic::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.';
    if (keep) {
      out += c;
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

bool is_outcome(const Error& e) {
  static const std::set<std::string> kinds{"NoViolationAtPoint", "NoInvariantDensity", "SupportViolation"};
  return kinds.count(e.kind()) > 0;
}

/// Collects checks, warnings and artifacts of one command and writes
/// summary.json.
class Report {
 public:
  Report(std::string command, const fs::path& input, std::ostream& log) : log_(log) {
    doc_["command"] = std::move(command);
    doc_["input"] = input.filename().string();
    doc_["checks"] = json::array();
    doc_["warnings"] = json::array();
    doc_["artifacts"] = json::array();
    doc_["metadata"] = json::object();
  }

  void check(const std::string& name, bool passed, double value, double threshold, const std::string& relation) {
    doc_["checks"].push_back({{"name", name}, {"passed", passed}, {"value", value}, {"threshold", threshold},
                              {"relation", relation}});
    log_ << (passed ? "[pass] " : "[FAIL] ") << name << ": " << fmt(value) << ' ' << relation << ' ' << fmt(threshold)
         << '\n';
    if (!passed) failed_ = true;
  }

  void warn(const std::string& kind, const std::string& detail) {
    doc_["warnings"].push_back({{"kind", kind}, {"detail", detail}});
    log_ << "[warn] " << kind << ": " << detail << '\n';
  }

  void note(const std::string& line) { log_ << line << '\n'; }
  json& metadata() { return doc_["metadata"]; }
  json& section(const std::string& key) { return doc_[key]; }

  std::ofstream open(const fs::path& dir, const std::string& name) {
    doc_["artifacts"].push_back(name);
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw SchemaError("cannot write '" + (dir / name).string() + "'");
    return f;
  }

  void error(const Error& e) {
    error_ = is_outcome(e) ? kInvariantFailure : kInputError;
    doc_["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    log_ << (error_ == kInvariantFailure ? "[FAIL] " : "[error] ") << e.what() << '\n';
  }

  void error(const std::exception& e) {
    error_ = kInputError;
    doc_["error"] = {{"kind", "InputError"}, {"message", e.what()}};
    log_ << "[error] " << e.what() << '\n';
  }

  int finish(const fs::path& dir) {
    const int code = error_ ? *error_ : (failed_ ? kInvariantFailure : kPass);
    json failed = json::array();
    for (const json& c : doc_["checks"]) {
      if (!c["passed"].get<bool>()) failed.push_back(c["name"]);
    }
    if (doc_.contains("error") && code == kInvariantFailure) failed.push_back(doc_["error"]["kind"]);
    doc_["failed"] = failed;
    doc_["exit_code"] = code;
    doc_["status"] = code == kPass ? "pass" : code == kInvariantFailure ? "invariant-failure" : "input-error";
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream f(dir / "summary.json", std::ios::binary);
    if (f) f << doc_.dump(2) << '\n';
    log_ << doc_["status"].get<std::string>() << " (exit " << code << ")\n";
    return code;
  }

 private:
  std::ostream& log_;
  json doc_;
  bool failed_ = false;
  std::optional<int> error_;
};

std::ostream& log_stream(const CommandOptions& opt) { return opt.log ? *opt.log : std::cout; }

fs::path output_dir(const CommandOptions& opt, const std::string& scenario_out, const fs::path& input) {
  if (opt.out) return *opt.out;
  if (!scenario_out.empty()) return scenario_out;
  return fs::path("out") / input.stem();
}

Scenario load_with_overrides(const fs::path& file, const CommandOptions& opt) {
  Scenario s = load_scenario(file);
  if (opt.grid_n) {
    if (*opt.grid_n < 3) throw SchemaError("--grid-n must be at least 3");
    s.grid_nodes = *opt.grid_n;
  }
  if (opt.tol) {
    if (!(*opt.tol > 0.0 && *opt.tol <= 1e-6)) throw SchemaError("--tol must lie in (0, 1e-6]");
    s.tol.uniformization = *opt.tol;
  }
  if (opt.seed && s.oracle) s.oracle->seed = *opt.seed;
  return s;
}

/// Runs `body` with uniform error handling. The output directory is known
/// only once the scenario has been read, so `body` sets it.
int guarded(const std::string& command, const fs::path& input, const CommandOptions& opt,
            const std::function<void(Report&, fs::path&)>& body) {
  Report report(command, input, log_stream(opt));
  fs::path dir = output_dir(opt, "", input);
  try {
    body(report, dir);
  } catch (const Error& e) {
    report.error(e);
  } catch (const std::exception& e) {
    report.error(e);
  }
  return report.finish(dir);
}

void describe_setup(Report& r, const Scenario& s, const DiscreteGenerator& q) {
  json& m = r.metadata();
  m["scenario"] = s.name;
  m["generator"] = s.generator_origin;
  m["grid_nodes"] = s.grid_nodes;
  json bounds = json::array();
  for (const auto& [lo, hi] : s.spec.domain.bounds) bounds.push_back({lo, hi});
  m["bounds"] = bounds;
  m["boundary_condition"] = s.spec.domain.boundary_condition == BoundaryCondition::kNoFlux ? "no-flux" : "absorbing";
  m["scheme"] = to_string(q.scheme);
  m["lambda_max"] = q.lambda_max;
  m["uniformization_tol"] = s.tol.uniformization;
  if (s.equilibrium && !s.equilibrium->normalizable) {
    m["truncation"] = "equilibrium is not normalizable on the full domain; it is normalized over the grid box";
  }
}

DiscreteGenerator discretize(Report& r, const Scenario& s) {
  const DiscreteGenerator q = build_qmatrix(s.spec, s.grid(), s.scheme);
  describe_setup(r, s, q);
  const MaximumPrincipleReport mp = maximum_principle_check(q);
  r.check("maximum_principle.min_off_diagonal", mp.min_off_diagonal >= -1e-12, mp.min_off_diagonal, -1e-12, ">=");
  r.check("maximum_principle.row_sum", mp.max_row_sum <= 1e-10, mp.max_row_sum, 1e-10, "<=");
  return q;
}

std::optional<InvariantSolution> invariant_law(Report& r, const Scenario& s, const DiscreteGenerator& q) {
  try {
    return solve_invariant(q);
  } catch (const NoInvariantDensity& e) {
    if (s.require_invariant) throw;
    r.warn("NoInvariantDensity", std::string(e.what()) + "; H-curves skipped");
    return std::nullopt;
  }
}

UniformizationOptions uniformization(const Scenario& s) {
  UniformizationOptions u;
  u.tol = s.tol.uniformization;
  return u;
}

void h_curves(Report& r, const fs::path& dir, const Scenario& s, const DiscreteGenerator& q,
              const EvolutionResult& ev, const InvariantSolution& pi) {
  const std::optional<EquilibriumDensity> analytic = s.reference_density(q.grid);
  const EquilibriumDensity rho0 = analytic ? *analytic : equilibrium_from_values(pi.pi);
  const HCurveDiagnostics diag{&s.spec, &rho0};
  json curves = json::array();
  for (std::size_t k = 0; k < s.h.size(); ++k) {
    const HFunctional& h = s.h[k];
    const HCurve c = h_curve(ev, pi.pi, h, s.tol.monotone, diag);
    const std::string file = "hcurve_" + std::to_string(k) + "_" + slug(h.describe()) + ".csv";
    {
      std::ofstream f = r.open(dir, file);
      write_hcurve_csv(f, c);
    }
    r.check("h_monotone[" + h.describe() + "]", c.monotone(), c.max_increase, c.tolerance, "<=");
    json entry{{"h", h.describe()}, {"file", file}, {"initial", c.h.front()}, {"final", c.h.back()},
               {"max_increase", c.max_increase}};
    if (!c.boundary.empty()) entry["max_boundary_term"] = *std::max_element(c.boundary.begin(), c.boundary.end());
    curves.push_back(entry);
  }
  r.section("h_curves") = curves;
  r.metadata()["h_reference"] = "discrete invariant law";
  r.metadata()["diagnostic_density"] = analytic ? "analytic equilibrium normalized on the grid" : "discrete invariant law";
}

}  // namespace

int cmd_run(const fs::path& file, const CommandOptions& opt) {
  return guarded("run", file, opt, [&](Report& r, fs::path& dir) {
    const Scenario s = load_with_overrides(file, opt);
    dir = output_dir(opt, s.output, file);
    fs::create_directories(dir);
    const DiscreteGenerator q = discretize(r, s);
    if (s.export_qmatrix) {
      std::ofstream t = r.open(dir, "qmatrix.txt");
      write_triplets(t, q.q);
      std::ofstream m = r.open(dir, "qmatrix.json");
      m << qmatrix_metadata(q) << '\n';
    }
    const std::optional<InvariantSolution> pi = invariant_law(r, s, q);
    const ScalarField nu0 = initial_density(s.initial, q.grid, pi ? &pi->pi : nullptr);
    const EvolutionResult ev = evolve_density(q, nu0, s.times, uniformization(s));
    {
      std::ofstream f = r.open(dir, "evolution.csv");
      write_evolution_csv(f, ev);
      std::ofstream g = r.open(dir, "evolution_summary.csv");
      write_evolution_summary_csv(g, ev);
    }
    const double min_value = *std::min_element(ev.min_value.begin(), ev.min_value.end());
    r.check("positivity", min_value >= -s.tol.positivity, min_value, -s.tol.positivity, ">=");
    double drift = 0.0;
    for (double m : ev.mass) drift = std::max(drift, std::abs(m - ev.mass.front()));
    if (s.spec.domain.boundary_condition == BoundaryCondition::kNoFlux) {
      r.check("mass_conservation", drift <= s.tol.mass, drift, s.tol.mass, "<=");
    } else {
      r.warn("MassLoss", "absorbing walls removed " + fmt(drift) + " of the initial mass");
    }
    if (s.chapman_kolmogorov) {
      const auto [t, u] = *s.chapman_kolmogorov;
      const double d = chapman_kolmogorov_defect(q, t, u, s.tol.uniformization);
      const double bound = std::max(3e-10, 3.0 * s.tol.uniformization);
      r.check("chapman_kolmogorov(t=" + fmt(t) + ",s=" + fmt(u) + ")", d <= bound, d, bound, "<=");
    }
    if (pi) h_curves(r, dir, s, q, ev, *pi);
  });
}

int cmd_invariant(const fs::path& file, const CommandOptions& opt) {
  return guarded("invariant", file, opt, [&](Report& r, fs::path& dir) {
    const Scenario s = load_with_overrides(file, opt);
    dir = output_dir(opt, s.output, file);
    fs::create_directories(dir);
    const DiscreteGenerator q = discretize(r, s);
    const InvariantSolution sol = solve_invariant(q);
    const ScalarField& pi = sol.pi;
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(pi.values.data(), static_cast<Eigen::Index>(pi.size()));
    const Eigen::VectorXd res = adjoint_qmatrix(q) * v;
    const double qnorm = 2.0 * q.lambda_max;
    const double residual = res.cwiseAbs().maxCoeff();
    r.check("invariant_residual", residual <= s.tol.residual * qnorm, residual, s.tol.residual * qnorm, "<=");
    r.check("invariant_nonnegative", pi.min() >= 0.0, pi.min(), 0.0, ">=");
    r.section("invariant") = {{"unique", sol.unique}, {"classes", sol.unique ? 1 : sol.basis.size()}};
    const std::optional<EquilibriumDensity> analytic = s.reference_density(q.grid);
    {
      std::ofstream f = r.open(dir, "invariant.csv");
      f << "node_index,x,pi" << (analytic ? ",analytic" : "") << '\n';
      for (std::size_t i = 0; i < pi.size(); ++i) {
        f << i << ',' << csv_number(q.grid.x(i)) << ',' << csv_number(pi[i]);
        if (analytic) f << ',' << csv_number(analytic->field[i]);
        f << '\n';
      }
    }
    if (analytic) {
      const double l1 = l1_distance(pi, analytic->field);
      r.section("invariant")["l1_to_analytic"] = l1;
      if (s.tol.invariant_l1) {
        r.check("invariant_l1_to_analytic", l1 <= *s.tol.invariant_l1, l1, *s.tol.invariant_l1, "<=");
      } else {
        r.note("L1 distance to the analytic equilibrium: " + fmt(l1));
      }
    }
  });
}

int cmd_hcurve(const fs::path& file, const CommandOptions& opt) {
  return guarded("hcurve", file, opt, [&](Report& r, fs::path& dir) {
    const Scenario s = load_with_overrides(file, opt);
    dir = output_dir(opt, s.output, file);
    fs::create_directories(dir);
    const DiscreteGenerator q = discretize(r, s);
    const InvariantSolution pi = solve_invariant(q);
    const ScalarField nu0 = initial_density(s.initial, q.grid, &pi.pi);
    const EvolutionResult ev = evolve_density(q, nu0, s.times, uniformization(s));
    h_curves(r, dir, s, q, ev, pi);
    if (!s.dissipation_dt) return;
    // The identity is checked against the discrete invariant law, the one H
    // decays to. The wall flux needs Gibbs data, so it uses the analytic
    // equilibrium when there is one.
    const EquilibriumDensity rho0 = equilibrium_from_values(pi.pi);
    const std::optional<EquilibriumDensity> analytic = s.reference_density(q.grid);
    const double dt = *s.dissipation_dt;
    std::ofstream f = r.open(dir, "dissipation.csv");
    f << "h,time,slope,rate,relative_gap,boundary_term\n";
    json rows = json::array();
    for (const HFunctional& h : s.h) {
      if (!h.has_second_derivative()) continue;
      double worst = 0.0;
      for (double t : s.times) {
        if (t - dt < 0.0) continue;
        const DissipationCheck d = dH_dt_consistency(q, s.spec, rho0, nu0, h, t, dt, uniformization(s));
        const double wall =
            analytic ? boundary_term(s.spec, *analytic, relative_density(d.density, analytic->field), h) : d.boundary;
        worst = std::max(worst, d.relative_gap);
        f << h.describe() << ',' << csv_number(t) << ',' << csv_number(d.slope) << ',' << csv_number(d.rate) << ','
          << csv_number(d.relative_gap) << ',' << csv_number(wall) << '\n';
        rows.push_back({{"h", h.describe()}, {"time", t}, {"slope", d.slope}, {"rate", d.rate},
                        {"relative_gap", d.relative_gap}, {"boundary_term", wall}});
      }
      if (s.tol.dissipation_gap) {
        r.check("dissipation_gap[" + h.describe() + "]", worst <= *s.tol.dissipation_gap, worst,
                *s.tol.dissipation_gap, "<=");
      }
    }
    r.section("dissipation") = rows;
  });
}

int cmd_oracle_compare(const fs::path& file, const CommandOptions& opt) {
  return guarded("oracle-compare", file, opt, [&](Report& r, fs::path& dir) {
    const Scenario s = load_with_overrides(file, opt);
    dir = output_dir(opt, s.output, file);
    fs::create_directories(dir);
    if (!s.oracle) throw SchemaError("missing field 'oracle'");
    const OracleSettings& o = *s.oracle;
    const DiscreteGenerator q = discretize(r, s);
    const ScalarField nu0 = initial_density(s.initial, q.grid, nullptr);
    const EvolutionResult ev = evolve_density(q, nu0, o.snapshots, uniformization(s));
    r.metadata()["seed"] = o.seed;
    r.metadata()["particles"] = o.particles;
    r.metadata()["dt"] = o.dt;

    const InitialSampler sampler = density_sampler(nu0);
    const WallHandling walls =
        s.spec.domain.boundary_condition == BoundaryCondition::kNoFlux ? WallHandling::kReflect : WallHandling::kAbsorb;
    std::ofstream dens = r.open(dir, "oracle_density.csv");
    dens << "time,node_index,x,particle,pde\n";
    json snaps = json::array();
    bool dt_flagged = false;
    for (std::size_t k = 0; k < ev.times.size(); ++k) {
      SimulationOptions so;
      so.particles = o.particles;
      so.dt = o.dt;
      so.horizon = ev.times[k];
      so.seed = o.seed;
      so.threads = o.threads;
      so.walls = walls;
      const ParticleEnsemble ens = simulate(s.spec, sampler, so);
      if (ens.dt_warning && !dt_flagged) {
        r.warn("MomentBiasWarning", "particle dt " + fmt(o.dt) + " exceeds 0.1 / max|db|; Euler bias is not negligible");
        dt_flagged = true;
      }
      const ScalarField emp = empirical_density(ens, q.grid);
      const double l1 = l1_distance(emp, ev.fields[k]);
      r.check("l1(t=" + fmt(ev.times[k]) + ")", l1 <= o.budget, l1, o.budget, "<=");
      snaps.push_back({{"time", ev.times[k]}, {"l1", l1}, {"absorbed", ens.absorbed_count()}});
      for (std::size_t i = 0; i < emp.size(); ++i) {
        dens << csv_number(ev.times[k]) << ',' << i << ',' << csv_number(q.grid.x(i)) << ',' << csv_number(emp[i])
             << ',' << csv_number(ev.fields[k][i]) << '\n';
      }
    }
    r.section("snapshots") = snaps;

    if (o.moment_points.empty()) return;
    const MomentRecovery rec = recover_coefficients(q, o.moment_t, s.tol.uniformization);
    if (rec.bias_warning) {
      r.warn("MomentBiasWarning", "lambda_max * t = " + fmt(rec.lambda_t) +
                                      " > 0.1; grid moments carry an O(t) bias (see drift_bias, diffusion_bias)");
    }
    const int steps = std::max(1, static_cast<int>(std::lround(o.moment_t / o.dt)));
    std::ofstream mf = r.open(dir, "moments.csv");
    mf << "x0,b,a,b_particle,b_particle_se,a_particle,a_particle_se,third_particle,b_grid,a_grid,third_grid,"
          "b_grid_bias,a_grid_bias\n";
    json table = json::array();
    for (double x0 : o.moment_points) {
      const MomentEstimate me = moment_estimates(s.spec, x0, o.moment_t, o.moment_particles, o.seed, steps, o.threads);
      std::size_t node = 0;
      for (std::size_t i = 1; i < q.grid.size(); ++i) {
        if (std::abs(q.grid.x(i) - x0) < std::abs(q.grid.x(node) - x0)) node = i;
      }
      const double b = s.spec.b(point(x0))(0);
      const double a = s.spec.a(point(x0))(0, 0);
      mf << csv_number(x0) << ',' << csv_number(b) << ',' << csv_number(a) << ',' << csv_number(me.drift) << ','
         << csv_number(me.drift_se) << ',' << csv_number(me.diffusion) << ',' << csv_number(me.diffusion_se) << ','
         << csv_number(me.third) << ',' << csv_number(rec.drift[node]) << ',' << csv_number(rec.diffusion[node])
         << ',' << csv_number(rec.third_moment[node]) << ',' << csv_number(rec.drift_bias[node]) << ','
         << csv_number(rec.diffusion_bias[node]) << '\n';
      table.push_back({{"x0", x0},
                       {"b", b},
                       {"a", a},
                       {"particle", {{"b", me.drift}, {"b_se", me.drift_se}, {"a", me.diffusion},
                                     {"a_se", me.diffusion_se}, {"third", me.third}}},
                       {"grid", {{"x", q.grid.x(node)}, {"b", rec.drift[node]}, {"a", rec.diffusion[node]},
                                 {"third", rec.third_moment[node]}, {"b_bias", rec.drift_bias[node]},
                                 {"a_bias", rec.diffusion_bias[node]}}}});
    }
    r.section("moments") = {{"t", o.moment_t}, {"lambda_t", rec.lambda_t}, {"rows", table}};
  });
}

int cmd_pawula(const fs::path& file, const CommandOptions& opt) {
  return guarded("pawula", file, opt, [&](Report& r, fs::path& dir) {
    const OperatorDocument d = parse_operator(read_file(file), file.parent_path());
    if (opt.out) dir = *opt.out;
    fs::create_directories(dir);
    const int order = d.op.order();
    r.metadata()["operator"] = d.origin;
    r.metadata()["order"] = order;
    r.metadata()["points"] = d.points.size();

    std::optional<PawulaCertificate> cert;
    if (order >= 3) {
      try {
        cert = pawula_counterexample(d.op, d.x0, d.epsilon, d.amplitude);
      } catch (const NoViolationAtPoint&) {
        cert = scan_for_certificate(d.op, d.points, d.epsilon);
      }
    } else {
      const SignCheck sc = second_order_sign_check(d.op, d.points);
      r.section("sign_check") = {{"passed", sc.passed}, {"worst_value", sc.worst_value},
                                 {"worst_point", sc.worst_point}};
      if (!sc.passed) cert = find_certificate(d.op, d.points[sc.worst_point], d.epsilon);
    }
    if (!cert) {
      r.check("maximum_principle", true, 0.0, 0.0, "<=");
      r.note("pass: no maximum-principle violation at " + std::to_string(d.points.size()) + " points");
      return;
    }
    {
      std::ofstream f = r.open(dir, "certificate.json");
      f << certificate_to_json(*cert) << '\n';
    }
    r.section("certificate") = json::parse(certificate_to_json(*cert));
    r.section("certificate")["verified_local_maximum"] = verify_local_maximum(*cert);
    r.note("violation: Z g(x0) = " + fmt(cert->value) + " > 0 at x0 = " + fmt(cert->x0(0)));
    r.note("  g = " + cert->g.to_string());
    r.note("  validity radius " + fmt(cert->validity_radius));
    r.check("maximum_principle", false, cert->value, 0.0, "<=");
  });
}

}  // namespace kinetic::cli
