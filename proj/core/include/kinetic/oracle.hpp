#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "kinetic/generator.hpp"
#include "kinetic/grid.hpp"

namespace kinetic {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every
/// (key, counter) pair maps to an independent block of four 32-bit words, so
/// each particle owns a stream no matter how particles are split over threads.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;
  explicit Philox(std::uint64_t seed) : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Block operator()(Block counter) const;
  /// Two standard normals from one block (Box-Muller).
  std::array<double, 2> normals(Block counter) const;
  /// Two uniforms in (0, 1) with 53 random bits each.
  std::array<double, 2> uniforms(Block counter) const;

 private:
  std::array<std::uint32_t, 2> key_;
};

enum class WallHandling { kReflect, kAbsorb };

/// Draws the starting point of particle `id` from the stream of `rng`.
using InitialSampler = std::function<Vec(std::uint64_t id, const Philox& rng)>;

InitialSampler point_sampler(Vec x0);
InitialSampler uniform_sampler(double lo, double hi);
InitialSampler gaussian_sampler(double mean, double sd);
/// Picks a cell with probability proportional to its mass, then a uniform
/// point inside the cell (cells are clipped to the grid box).
InitialSampler density_sampler(const ScalarField& density);

struct SimulationOptions {
  std::uint64_t particles = 100000;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  WallHandling walls = WallHandling::kReflect;
};

struct ParticleEnsemble {
  int dimension = 1;
  std::vector<double> positions;      // particle-major, dimension entries each
  std::vector<std::uint8_t> absorbed;
  std::uint64_t seed = 0;
  double time = 0.0;
  double dt = 0.0;
  WallHandling walls = WallHandling::kReflect;
  /// dt above 0.1 / max|d b| over the domain (explicit Euler stability
  /// heuristic).
  bool dt_warning = false;

  std::size_t count() const { return absorbed.size(); }
  std::size_t absorbed_count() const;
  Vec position(std::size_t i) const;
};

/// Euler-Maruyama for dX = b dt + sqrt(2 a) dW. The factor 2 matches the
/// generator a_ij d_i d_j without the 1/2. Reflection mirrors overshoot back
/// into the box; absorbed particles are frozen and flagged.
///
/// Results are bitwise identical for any `threads`. Throws
/// NonEllipticCoefficient when a < 0 is met.
ParticleEnsemble simulate(const GeneratorSpec& spec, const InitialSampler& sampler, const SimulationOptions& opt);

/// Histogram over the cells of `grid` normalised to unit mass over the
/// particles still alive. Throws EmptyEnsemble when none are.
ScalarField empirical_density(const ParticleEnsemble& ensemble, const Grid& grid);

struct MomentEstimate {
  double drift = 0.0;       // E[dX] / t
  double diffusion = 0.0;   // E[dX^2] / (2 t)
  double third = 0.0;       // E[|dX|^3] / t
  double drift_se = 0.0;    // Monte Carlo standard errors
  double diffusion_se = 0.0;
  double third_se = 0.0;
};

/// Starts every particle at x0 (1-D) and runs one window of length t_small
/// with `steps` Euler steps.
MomentEstimate moment_estimates(const GeneratorSpec& spec, double x0, double t_small, std::uint64_t particles,
                                std::uint64_t seed, int steps = 1, int threads = 1);

}  // namespace kinetic
