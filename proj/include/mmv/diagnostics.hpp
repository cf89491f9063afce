#pragma once

#include <string>
#include <vector>

#include "mmv/coeff.hpp"
#include "mmv/monotone.hpp"
#include "mmv/noise.hpp"
#include "mmv/solver.hpp"
#include "mmv/types.hpp"

namespace mmv {

/// C^2 compactly supported test functions with analytic derivatives.
class TestFunction {
public:
  /// exp(-1/(1-|x-c|^2/r^2)) inside the ball, 0 outside.
  static TestFunction bump(Vec center, double radius);
  /// |x|^2 times a quintic-smoothstep cutoff: 1 on |x| <= r_inner, 0 beyond r_outer.
  static TestFunction quadratic_window(double r_inner, double r_outer, int dim);

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  const std::string& name() const { return name_; }

private:
  TestFunction() = default;
  enum class Kind { bump, quadratic_window } kind_ = Kind::bump;
  Vec center_;
  double radius_ = 1.0;
  double r_in_ = 1.0, r_out_ = 2.0;
  int dim_ = 1;
  std::string name_;
};

// ---------------------------------------------------------------------------

struct PairCheckReport {
  bool pass = false;
  double worst_margin = 0.0;
  int worst_particle = -1;
  int worst_window_lo = -1, worst_window_hi = -1;
  int pairs = 0, particles = 0, windows = 0;
};

/// Discrete A-membership check: for each graph pair (x, x*), particle, and
/// dyadic window of base steps, sum <X_new - x, dK - x* h> must be >= -tol
/// (exact up to arithmetic by the resolvent construction).
PairCheckReport check_pair_in_A(const SolutionEnsemble& ens, const std::vector<GraphPair>& pairs,
                                double tol);

struct CepaRow {
  double s = 0.0, t = 0.0;
  double lhs = 0.0;       // mean over particles of int <X - a0, dK>
  double ktv = 0.0;       // mean variation of K on [s,t]
  double integral = 0.0;  // mean int |X - a0| dr
};

struct CepaReport {
  std::vector<CepaRow> rows;  // one row per dyadic window (particle-averaged)
  double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
  bool unconstrained = false;  // no window accumulated variation (e.g. A = 0)
};

/// Reporting diagnostic for the Cepa inequality: per-window quantities and a
/// best-fit (kappa1 > 0, kappa2, kappa3 >= 0) over per-particle constraints
/// (coarse grid search in kappa2/kappa3, then the binding kappa1).
CepaReport cepa_report(const SolutionEnsemble& ens, const ConvexDomain& domain, const Vec& a0);

struct AldousReport {
  std::vector<double> deltas;
  std::vector<double> modulus;  // sup over probe pairs with gap <= delta of P(|dX| > rho)
  std::vector<double> tail_a;
  std::vector<double> tail_p;  // P(||X||_D >= a)
};

/// Aldous-criterion estimators over a deterministic probe grid of time pairs
/// (stopping-time suprema are relaxed to deterministic pairs, which keeps the
/// estimate monotone in delta), plus the uniform-boundedness tail ladder.
AldousReport aldous_modulus(const SolutionEnsemble& ens, const std::vector<double>& deltas,
                            double rho, int max_probe_times = 64);

enum class GeneratorForm { quadratic, compensator };

struct DefectEntry {
  std::string f_name, gamma_name;
  double s = 0.0, t = 0.0;
  double defect = 0.0;
  double se = 0.0;
};

struct GammaFunctional {
  std::string name;
  // times at which clipped first coordinates enter (empty = constant 1).
  // Absolute times are clamped to s; with relative = true they are fractions
  // of s (e.g. {0.5} is the clipped coordinate at s/2).
  std::vector<double> times;
  bool relative = false;
};

/// Discretized martingale-problem defect E[(M_t - M_s) Gamma] with Monte Carlo
/// standard errors. The jump term of the generator comes in two forms: the
/// exact compensator identity f(x+G) - f(x) - <grad f, G>, or its quadratic
/// (second-order Taylor) approximation 1/2 G* grad^2 f G. Only the compensator
/// form makes the defect vanish on jump scenarios; the quadratic form is for
/// side-by-side reporting.
std::vector<DefectEntry> martingale_defect(const SolutionEnsemble& ens,
                                           const std::vector<TestFunction>& fs,
                                           const CoefficientKernel& kernel, const LevyConfig& levy,
                                           const std::vector<std::pair<double, double>>& st_pairs,
                                           const std::vector<GammaFunctional>& gammas,
                                           GeneratorForm form);

enum class PsiKind { linear, linear_plus_log };

double psi_value(PsiKind kind, double u);

/// Integrate y' = C psi(y), y(0) = y0 on [0, T] with classical RK4 at `steps`
/// uniform steps; returns y at the grid times (steps+1 values).
std::vector<double> osgood_majorant(PsiKind psi, double c, double y0, double t_end, int steps);

struct MajorantFit {
  double c = 0.0;
  double y0 = 0.0;
  std::vector<double> majorant;  // on the curve's grid (explicit Euler)
  bool dominates = false;
};

/// Fit the smallest C whose Euler majorant from y0 = curve[0] + floor dominates
/// the measured curve (C = max increment ratio against psi; domination then
/// follows by induction and is re-checked).
MajorantFit fit_osgood_majorant(const std::vector<double>& times, const std::vector<double>& curve,
                                PsiKind psi);

}  // namespace mmv
