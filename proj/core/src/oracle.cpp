#include "kinetic/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/Eigenvalues>

#include "kinetic/errors.hpp"

namespace kinetic {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

// Counter word 1 carries this bit for draws that are not Euler steps.
constexpr std::uint32_t kInitialStream = 0x80000000u;

Philox::Block particle_counter(std::uint64_t step_block, std::uint64_t id, std::uint32_t stream = 0) {
  return {static_cast<std::uint32_t>(step_block), static_cast<std::uint32_t>(step_block >> 32) | stream,
          static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
}

}  // namespace

Philox::Block Philox::operator()(Block c) const {
  std::uint32_t k0 = key_[0];
  std::uint32_t k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += kW0;
    k1 += kW1;
  }
  return c;
}

std::array<double, 2> Philox::uniforms(Block counter) const {
  const Block w = (*this)(counter);
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const std::uint64_t u0 = (static_cast<std::uint64_t>(w[0]) << 21) ^ (w[1] >> 11);
  const std::uint64_t u1 = (static_cast<std::uint64_t>(w[2]) << 21) ^ (w[3] >> 11);
  return {(static_cast<double>(u0) + 0.5) * kScale, (static_cast<double>(u1) + 0.5) * kScale};
}

std::array<double, 2> Philox::normals(Block counter) const {
  const auto [u0, u1] = uniforms(counter);
  const double r = std::sqrt(-2.0 * std::log(u0));
  const double theta = 2.0 * std::numbers::pi * u1;
  return {r * std::cos(theta), r * std::sin(theta)};
}

InitialSampler point_sampler(Vec x0) {
  return [x0](std::uint64_t, const Philox&) { return x0; };
}

InitialSampler uniform_sampler(double lo, double hi) {
  return [lo, hi](std::uint64_t id, const Philox& rng) {
    return point(lo + (hi - lo) * rng.uniforms(particle_counter(0, id, kInitialStream))[0]);
  };
}

InitialSampler gaussian_sampler(double mean, double sd) {
  return [mean, sd](std::uint64_t id, const Philox& rng) {
    return point(mean + sd * rng.normals(particle_counter(0, id, kInitialStream))[0]);
  };
}

InitialSampler density_sampler(const ScalarField& density) {
  const Grid& g = density.grid;
  if (g.dimension() != 1) throw ShapeError("density sampler is one dimensional");
  std::vector<double> cdf(density.size());
  double total = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (density[i] < 0.0) throw PreconditionViolated("density sampler needs non-negative values");
    total += density[i];
    cdf[i] = total;
  }
  if (!(total > 0.0)) throw EmptyEnsemble("density to sample has no mass");
  for (double& c : cdf) c /= total;
  const Axis ax = g.axis(0);
  return [cdf = std::move(cdf), ax](std::uint64_t id, const Philox& rng) {
    const auto [u0, u1] = rng.uniforms(particle_counter(0, id, kInitialStream));
    const std::size_t i = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u0) - cdf.begin()), cdf.size() - 1);
    const double h = ax.spacing();
    const double lo = std::max(ax.lo, ax.coordinate(static_cast<int>(i)) - 0.5 * h);
    const double hi = std::min(ax.hi, ax.coordinate(static_cast<int>(i)) + 0.5 * h);
    return point(lo + (hi - lo) * u1);
  };
}

std::size_t ParticleEnsemble::absorbed_count() const {
  return static_cast<std::size_t>(std::count(absorbed.begin(), absorbed.end(), std::uint8_t{1}));
}

Vec ParticleEnsemble::position(std::size_t i) const {
  Vec x(dimension);
  for (int d = 0; d < dimension; ++d) x(d) = positions[i * static_cast<std::size_t>(dimension) + static_cast<std::size_t>(d)];
  return x;
}

namespace {

// Scalar coefficient access for the 1-D hot loop; expressions are evaluated
// directly instead of through the matrix-valued callbacks.
struct ScalarCoefficients {
  const GeneratorSpec& spec;
  const Expression* a_expr = nullptr;
  const Expression* b_expr = nullptr;

  explicit ScalarCoefficients(const GeneratorSpec& s) : spec(s) {
    if (s.source) {
      a_expr = std::get_if<Expression>(&s.source->a[0][0]);
      b_expr = std::get_if<Expression>(&s.source->b[0]);
    }
  }
  double a(double x) const { return a_expr ? a_expr->evaluate(&x) : spec.a(point(x))(0, 0); }
  double b(double x) const { return b_expr ? b_expr->evaluate(&x) : spec.b(point(x))(0); }
};

double reflect(double x, double lo, double hi) {
  for (int guard = 0; guard < 64 && (x < lo || x > hi); ++guard) {
    if (x > hi) x = 2.0 * hi - x;
    if (x < lo) x = 2.0 * lo - x;
  }
  return std::clamp(x, lo, hi);
}

bool drift_too_stiff(const GeneratorSpec& spec, double dt) {
  const int n = spec.dimension;
  double worst = 0.0;
  const int samples = 1001;
  for (int d = 0; d < n; ++d) {
    const auto [lo, hi] = spec.domain.bounds[static_cast<std::size_t>(d)];
    Vec mid(n);
    for (int e = 0; e < n; ++e) mid(e) = 0.5 * (spec.domain.bounds[static_cast<std::size_t>(e)].first +
                                                 spec.domain.bounds[static_cast<std::size_t>(e)].second);
    const double h = (hi - lo) / (samples - 1);
    for (int k = 0; k + 1 < samples; ++k) {
      Vec x0 = mid;
      Vec x1 = mid;
      x0(d) = lo + k * h;
      x1(d) = lo + (k + 1) * h;
      worst = std::max(worst, std::abs((spec.b(x1)(d) - spec.b(x0)(d)) / h));
    }
  }
  return worst > 0.0 && dt > 0.1 / worst;
}

template <typename Body>
void parallel_chunks(std::uint64_t count, int threads, Body body) {
  threads = std::max(1, threads);
  if (threads == 1 || count < 2) {
    body(std::uint64_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::uint64_t chunk = (count + static_cast<std::uint64_t>(threads) - 1) / static_cast<std::uint64_t>(threads);
  for (int t = 0; t < threads; ++t) {
    const std::uint64_t begin = std::min(count, chunk * static_cast<std::uint64_t>(t));
    const std::uint64_t end = std::min(count, begin + chunk);
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void simulate_1d(const GeneratorSpec& spec, const Philox& rng, const SimulationOptions& opt,
                 std::uint64_t steps, double last_dt, ParticleEnsemble& e, std::uint64_t begin, std::uint64_t end) {
  const ScalarCoefficients c(spec);
  const double lo = spec.domain.bounds[0].first;
  const double hi = spec.domain.bounds[0].second;
  const bool absorb = opt.walls == WallHandling::kAbsorb;
  for (std::uint64_t p = begin; p < end; ++p) {
    double x = e.positions[p];
    std::array<double, 2> z{};
    for (std::uint64_t s = 0; s < steps; ++s) {
      if ((s & 1u) == 0) z = rng.normals(particle_counter(s >> 1, p));
      const double h = s + 1 == steps ? last_dt : opt.dt;
      const double a = c.a(x);
      if (a < 0.0) throw NonEllipticCoefficient("negative diffusion a(" + std::to_string(x) + ") in the particle path");
      x += c.b(x) * h + std::sqrt(2.0 * a * h) * z[s & 1u];
      if (x < lo || x > hi) {
        if (absorb) {
          e.absorbed[p] = 1;
          x = std::clamp(x, lo, hi);
          break;
        }
        x = reflect(x, lo, hi);
      }
    }
    e.positions[p] = x;
  }
}

void simulate_nd(const GeneratorSpec& spec, const Philox& rng, const SimulationOptions& opt,
                 std::uint64_t steps, double last_dt, ParticleEnsemble& e, std::uint64_t begin, std::uint64_t end) {
  const int n = spec.dimension;
  const bool absorb = opt.walls == WallHandling::kAbsorb;
  for (std::uint64_t p = begin; p < end; ++p) {
    Vec x = e.position(p);
    bool dead = false;
    for (std::uint64_t s = 0; s < steps && !dead; ++s) {
      const double h = s + 1 == steps ? last_dt : opt.dt;
      const auto z01 = rng.normals(particle_counter(2 * s, p));
      const auto z23 = rng.normals(particle_counter(2 * s + 1, p));
      Vec z(n);
      const double all[4] = {z01[0], z01[1], z23[0], z23[1]};
      for (int d = 0; d < n; ++d) z(d) = all[d];
      const Mat a = spec.a(x);
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
      if (es.eigenvalues().minCoeff() < -1e-12) throw NonEllipticCoefficient("negative diffusion in the particle path");
      const Mat sigma = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
      x += spec.b(x) * h + std::sqrt(2.0 * h) * (sigma * z);
      for (int d = 0; d < n; ++d) {
        const auto [lo, hi] = spec.domain.bounds[static_cast<std::size_t>(d)];
        if (x(d) >= lo && x(d) <= hi) continue;
        if (absorb) {
          dead = true;
          x(d) = std::clamp(x(d), lo, hi);
        } else {
          x(d) = reflect(x(d), lo, hi);
        }
      }
    }
    if (dead) e.absorbed[p] = 1;
    for (int d = 0; d < n; ++d) e.positions[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(d)] = x(d);
  }
}

}  // namespace

ParticleEnsemble simulate(const GeneratorSpec& spec, const InitialSampler& sampler, const SimulationOptions& opt) {
  if (opt.particles == 0) throw EmptyEnsemble("simulation needs at least one particle");
  if (!(opt.dt > 0.0) || !(opt.horizon >= 0.0)) throw TimeError("need dt > 0 and horizon >= 0");
  const int n = spec.dimension;
  const Philox rng(opt.seed);
  ParticleEnsemble e;
  e.dimension = n;
  e.seed = opt.seed;
  e.time = opt.horizon;
  e.dt = opt.dt;
  e.walls = opt.walls;
  e.dt_warning = drift_too_stiff(spec, opt.dt);
  e.positions.resize(opt.particles * static_cast<std::size_t>(n));
  e.absorbed.assign(opt.particles, 0);
  for (std::uint64_t p = 0; p < opt.particles; ++p) {
    const Vec x = sampler(p, rng);
    if (x.size() != n) throw ShapeError("sampler returned a point of the wrong dimension");
    if (!spec.domain.contains(x)) throw DomainError("initial particle outside the domain");
    for (int d = 0; d < n; ++d) e.positions[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(d)] = x(d);
  }
  const double ratio = opt.horizon / opt.dt;
  std::uint64_t steps = static_cast<std::uint64_t>(std::ceil(ratio - 1e-9));
  const double last_dt = steps == 0 ? 0.0 : opt.horizon - static_cast<double>(steps - 1) * opt.dt;
  parallel_chunks(opt.particles, opt.threads, [&](std::uint64_t begin, std::uint64_t end) {
    if (n == 1) {
      simulate_1d(spec, rng, opt, steps, last_dt, e, begin, end);
    } else {
      simulate_nd(spec, rng, opt, steps, last_dt, e, begin, end);
    }
  });
  return e;
}

ScalarField empirical_density(const ParticleEnsemble& ensemble, const Grid& grid) {
  if (grid.dimension() != ensemble.dimension) throw ShapeError("grid dimension does not match the ensemble");
  std::vector<double> counts(grid.size(), 0.0);
  std::size_t live = 0;
  std::vector<int> idx(static_cast<std::size_t>(grid.dimension()));
  for (std::size_t p = 0; p < ensemble.count(); ++p) {
    if (ensemble.absorbed[p]) continue;
    ++live;
    for (int d = 0; d < grid.dimension(); ++d) {
      const Axis& ax = grid.axis(d);
      const double x = ensemble.positions[p * static_cast<std::size_t>(ensemble.dimension) + static_cast<std::size_t>(d)];
      const long i = std::lround((x - ax.lo) / ax.spacing());
      idx[static_cast<std::size_t>(d)] = static_cast<int>(std::clamp<long>(i, 0, ax.nodes - 1));
    }
    counts[grid.flat_index(idx)] += 1.0;
  }
  if (live == 0) throw EmptyEnsemble("no particles left to histogram");
  const double norm = 1.0 / (static_cast<double>(live) * grid.weight());
  for (double& c : counts) c *= norm;
  return ScalarField(grid, std::move(counts));
}

MomentEstimate moment_estimates(const GeneratorSpec& spec, double x0, double t_small, std::uint64_t particles,
                                std::uint64_t seed, int steps, int threads) {
  if (spec.dimension != 1) throw ShapeError("moment estimates are one dimensional");
  if (!(t_small > 0.0) || steps < 1) throw TimeError("need t_small > 0 and at least one step");
  SimulationOptions opt;
  opt.particles = particles;
  opt.dt = t_small / steps;
  opt.horizon = t_small;
  opt.seed = seed;
  opt.threads = threads;
  opt.walls = spec.domain.boundary_condition == BoundaryCondition::kAbsorbing ? WallHandling::kAbsorb
                                                                              : WallHandling::kReflect;
  const ParticleEnsemble e = simulate(spec, point_sampler(point(x0)), opt);

  // Fixed blocks summed in order: independent of the thread split.
  constexpr std::size_t kBlock = 4096;
  double s[6] = {0, 0, 0, 0, 0, 0};
  for (std::size_t begin = 0; begin < e.count(); begin += kBlock) {
    double b[6] = {0, 0, 0, 0, 0, 0};
    const std::size_t end = std::min(e.count(), begin + kBlock);
    for (std::size_t p = begin; p < end; ++p) {
      const double d = e.positions[p] - x0;
      const double d2 = d * d;
      const double d3 = d2 * std::abs(d);
      b[0] += d;
      b[1] += d2;
      b[2] += d3;
      b[3] += d2;
      b[4] += d2 * d2;
      b[5] += d3 * d3;
    }
    for (int k = 0; k < 6; ++k) s[k] += b[k];
  }
  const double n = static_cast<double>(e.count());
  const double m1 = s[0] / n;
  const double m2 = s[1] / n;
  const double m3 = s[2] / n;
  auto se = [n](double mean, double second) { return std::sqrt(std::max(second - mean * mean, 0.0) / n); };
  MomentEstimate r;
  r.drift = m1 / t_small;
  r.diffusion = m2 / (2.0 * t_small);
  r.third = m3 / t_small;
  r.drift_se = se(m1, s[3] / n) / t_small;
  r.diffusion_se = se(m2, s[4] / n) / (2.0 * t_small);
  r.third_se = se(m3, s[5] / n) / t_small;
  return r;
}

}  // namespace kinetic
