#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mmv/coeff.hpp"
#include "mmv/rng.hpp"
#include "mmv/types.hpp"

namespace mmv {

enum class LevyKind { none, discrete, uniform_annulus };

/// Finite Levy measure on the mark space from the catalog: a finite atom list
/// or the uniform measure on an annulus r_min <= |z| <= r_max scaled to total
/// mass lambda. small_cutoff is the alpha of Z_0 = {|z| <= alpha}.
class LevyConfig {
public:
  static LevyConfig none(int mark_dim = 1);
  static LevyConfig discrete(std::vector<Vec> atoms, std::vector<double> masses,
                             double small_cutoff = 1.0);
  static LevyConfig uniform_annulus(int mark_dim, double r_min, double r_max, double mass,
                                    double small_cutoff = 1.0);

  LevyKind kind() const { return kind_; }
  int mark_dim() const { return mark_dim_; }
  double total_mass() const { return total_mass_; }
  double small_cutoff() const { return small_cutoff_; }
  bool active() const { return kind_ != LevyKind::none && total_mass_ > 0.0; }

  /// int z nu(dz) (exact for atoms; radial-spherical quadrature for the annulus).
  const Vec& mean_mark() const { return mean_mark_; }
  /// int |z|^2 nu(dz).
  double second_moment() const { return second_moment_; }
  /// int_{|z|<=alpha} z nu(dz), used by the compensated small-jump diagnostics.
  Vec small_mark_mean(double alpha) const;

  /// Quadrature nodes (z_k, w_k) with sum w_k f(z_k) ~ int f dnu; exact for atoms.
  const std::vector<std::pair<Vec, double>>& integration_nodes() const { return nodes_; }

  /// Draw one mark from nu / nu(Z).
  Vec sample_mark(CounterStream& st) const;

  const std::vector<Vec>& atoms() const { return atoms_; }
  const std::vector<double>& masses() const { return masses_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }

private:
  LevyConfig() = default;
  void build_nodes();

  LevyKind kind_ = LevyKind::none;
  int mark_dim_ = 1;
  double total_mass_ = 0.0;
  double small_cutoff_ = 1.0;
  std::vector<Vec> atoms_;
  std::vector<double> masses_;
  std::vector<double> cum_;  // cumulative masses for sampling
  double r_min_ = 0.0, r_max_ = 0.0;
  std::vector<std::pair<Vec, double>> nodes_;
  Vec mean_mark_;
  double second_moment_ = 0.0;
};

struct JumpEventDraw {
  double time;  // in (0, 1]
  Vec mark;
};

/// Jump times/marks for one particle over [0,1]; a pure function of
/// (seed, particle), independent of the time grid.
std::vector<JumpEventDraw> sample_jumps(const LevyConfig& levy, uint64_t seed, uint32_t particle);

/// Brownian increment over base step `step` (variance h per component).
Vec brownian_increment(uint64_t seed, uint32_t particle, uint32_t step, int dim, double h);

/// One standard-normal bridge draw for splitting a base-step increment at jump
/// times; `index` enumerates draws within the step.
double bridge_normal(uint64_t seed, uint32_t particle, uint32_t step, uint32_t index);

struct NoisePath {
  std::vector<double> brownian;  // M x dim, row-major per step
  std::vector<JumpEventDraw> jumps;
};

struct NoiseEnsemble {
  std::vector<double> grid;  // strictly increasing, grid.front() = 0
  int dim = 1;
  std::vector<NoisePath> paths;
};

/// Materialize the keyed noise for tests, dumps and replay: Brownian increments
/// per base step and per-particle jump lists.
NoiseEnsemble sample_noise(const LevyConfig& levy, const std::vector<double>& grid, int dim,
                           int particles, uint64_t seed);

/// int_Z G[x, mu, z] nu(dz): exact for discrete nu, quadrature for the annulus.
Vec compensator_drift(const CoefficientKernel& kernel, const Vec& x, const MeasureSummary& mu,
                      const LevyConfig& levy);

}  // namespace mmv
