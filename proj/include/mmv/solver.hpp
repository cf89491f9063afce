#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmv/coeff.hpp"
#include "mmv/monotone.hpp"
#include "mmv/noise.hpp"
#include "mmv/types.hpp"

namespace mmv {

enum class LawMode { interacting, frozen };

struct InitialLaw {
  enum class Kind { point, uniform_box, gaussian };
  Kind kind = Kind::point;
  Vec point;       // point mass
  Vec lower, upper;  // uniform_box
  Vec mean;        // gaussian
  double stddev = 1.0;
};

struct SchemeConfig {
  double h = 0.01;  // base step; the grid uses 1/round(1/h) so t=1 is exact
  int particles = 1000;
  LawMode law_mode = LawMode::interacting;
  InitialLaw initial;
  bool enforce_h4 = true;
  int workers = 1;
  int snapshot_stride = 1;  // keep states every stride-th base time (first/last always)
  bool record_step_stats = true;
};

/// A law flow frozen in time: one cloud per base grid time.
struct LawFlow {
  int dim = 1;
  int particles = 0;
  std::vector<std::vector<double>> clouds;  // per base time, flat N*d
  std::vector<MeasureSummary> summaries;    // per base time
};

struct SubstepRecord {
  Vec x_new, dk;
  double h;  // 0 for an instantaneous projection at a jump ((H4) violation path)
};

struct StepOverrideRecord {
  int particle = 0, step = 0;
  std::vector<SubstepRecord> subs;
};

struct JumpEventRecord {
  int particle = 0, step = 0;
  double time = 0.0;
  Vec mark, pre_x, post_x;
  double post_distance = 0.0;  // distance of pre_x + G to the closed domain
  double dk_norm = 0.0;        // constraint action applied at the jump (0 under (H4))
};

struct LawSummaryRow {
  double t = 0.0;
  Vec mean;
  double l2 = 0.0;
};

/// Per-particle (X, K) data on the base grid plus per-step sufficient statistics:
/// s1 = sum over substeps of <X_new, dK>, s3 = sum of dK, s5 = sum of |dK|.
/// Together with the recorded states these reconstruct
/// sum <X_new - x, dK - x* h> exactly for every graph pair and window.
class SolutionEnsemble {
public:
  int dim = 1;
  int particles = 0;
  std::vector<double> grid;

  std::vector<int> snapshot_steps;              // base-step indices with stored states
  std::vector<std::vector<double>> snapshots;   // aligned with snapshot_steps, flat N*d

  bool has_step_stats = false;
  std::vector<double> s1, s5;  // [p*M + k]
  std::vector<double> s3;      // [(p*M + k)*d + a]
  std::vector<StepOverrideRecord> overrides;  // steps with jump substeps

  std::vector<double> sup_sq;  // per particle, sup over all substep points of |X|^2
  std::vector<double> k_tv;    // per particle, total variation of K over [0,1]
  std::vector<JumpEventRecord> jump_events;
  std::vector<LawSummaryRow> law_summary;  // one row per base time

  int projected_initial_count = 0;
  double max_domain_distance = 0.0;
  double max_jump_dk = 0.0;
  uint64_t seed = 0;

  int steps() const { return static_cast<int>(grid.size()) - 1; }
  /// Index into snapshots for base step k, or -1 if not recorded.
  int snapshot_index(int step) const;
  Vec state(int snapshot_idx, int particle) const;
  EmpiricalMeasure measure_at(int snapshot_idx) const;
  const StepOverrideRecord* override_for(int particle, int step) const;

  /// mean over particles of (sup_t |X|^2 + ||K||_TV), the Prop. 3.1 statistic.
  double moment_statistic() const;
};

/// Resolvent (projected) Euler with per-particle jump-adapted substeps.
/// `frozen` supplies the law flow when scheme.law_mode == frozen; `replay`
/// substitutes recorded Brownian increments for the keyed draws.
SolutionEnsemble simulate(const CoefficientKernel& kernel, const MonotoneOperator& op,
                          const LevyConfig& levy, const SchemeConfig& scheme, uint64_t seed,
                          const LawFlow* frozen = nullptr, const NoiseEnsemble* replay = nullptr);

struct PicardOptions {
  int max_iters = 15;
  double w2_tol = 1e-3;
};

struct PicardResult {
  SolutionEnsemble ensemble;
  std::vector<double> gaps;  // sup-t W2 between consecutive law flows, per iteration
  std::vector<double> last_gap_per_time;  // per-time W2 of the final iteration
  bool converged = false;
  int iterations = 0;
};

/// Picard iteration on the law flow: iterate k solves the frozen-law system
/// against flow k-1 with the same noise, stopping when the sup-t W2 gap drops
/// below tol. flow 0 is the law of X_0 at every time.
PicardResult picard_solve(const CoefficientKernel& kernel, const MonotoneOperator& op,
                          const LevyConfig& levy, const SchemeConfig& scheme,
                          const PicardOptions& opts, uint64_t seed);

struct CascadeResult {
  std::vector<int> levels;
  std::vector<double> e;  // e(levels[i], levels[i+1])
  std::vector<double> grid;
  std::vector<std::vector<double>> curves;  // per pair, (1/N) sum |X^m_t - X^n_t|^2 per time
};

/// Simulate with mollified coefficients at each level under common noise and
/// report consecutive-level mean-square gaps (the Cauchy diagnostic).
CascadeResult mollified_cascade(const CoefficientKernel& kernel, const MonotoneOperator& op,
                                const LevyConfig& levy, const SchemeConfig& scheme,
                                const std::vector<int>& levels, uint64_t seed,
                                Quadrature quad = {}, double lattice_halfwidth = 4.0);

struct CoupledResult {
  std::vector<double> grid;
  std::vector<double> g;  // (1/N) sum |X^a_t - X^b_t|^2 per base time
  bool identical = false;  // bitwise, when x0_a == x0_b
};

/// Two runs with identical noise and different (point) initial data.
CoupledResult coupled_run(const CoefficientKernel& kernel, const MonotoneOperator& op,
                          const LevyConfig& levy, SchemeConfig scheme, const Vec& x0_a,
                          const Vec& x0_b, uint64_t seed);

/// Initial states (flat N*d) drawn from the scheme's initial law, projected
/// into the closed domain; `projected_count` reports how many moved.
std::vector<double> sample_initial_states(const SchemeConfig& scheme, const MonotoneOperator& op,
                                          int dim, uint64_t seed, int* projected_count = nullptr);

}  // namespace mmv
