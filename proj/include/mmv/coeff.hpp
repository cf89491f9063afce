#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mmv/measure.hpp"
#include "mmv/types.hpp"

namespace mmv {

/// Concave moduli of continuity from the catalog. log_osgood is
/// u*ln(1/u) for u <= 1/e, capped at 1/e beyond (concave, nondecreasing, 0 at 0).
enum class ModulusKind { linear, log_osgood };

double modulus(ModulusKind kind, double u);

/// What the catalog kernels need from a law: all two-point kernels in the
/// catalog are affine in the second argument, so mean-field functionals depend
/// on mu only through its mean (the l2 size is carried for growth checks).
struct MeasureSummary {
  Vec mean;
  double l2 = 0.0;
};

MeasureSummary summarize(const EmpiricalMeasure& mu);

struct Quadrature {
  enum class Kind { tensor_gauss, monte_carlo };
  Kind kind = Kind::tensor_gauss;
  int points_per_axis = 48;  // tensor_gauss; >= 24 needed for the 1e-6 mass check
  int samples = 8192;        // monte_carlo
  uint64_t seed = 777;       // monte_carlo
  double mass_tol = 1e-6;    // normalization check tolerance
};

/// Smoothing kernel J^n(u) = a1*exp(-1/(1-|u/b1|^2)) on |u| < b1 with
/// a0 the unit-ball bump mass, b1 = (4n/a0)^{1/(d+1)}, a1 = b1/(4n); then
/// a1*b1^d*a0 = 1 so J^n integrates to 1. Convolutions shift arguments by
/// u/n, so the effective displacement scale is eps = b1/n.
class MollifierConfig {
public:
  MollifierConfig(int n, int dim, Quadrature quad = {});

  int n() const { return n_; }
  int dim() const { return dim_; }
  double a0() const { return a0_; }
  double b1() const { return b1_; }
  double a1() const { return a1_; }
  double eps() const { return eps_; }

  /// Quadrature estimate of the total mass of J^n; 1 up to quadrature error.
  double mass_estimate() const { return mass_estimate_; }

  /// Nodes in the unit cube and J-weighted normalized weights (sum exactly 1),
  /// so convolution preserves constants to machine precision.
  const std::vector<Vec>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Pointwise value of J^n.
  double kernel_value(const Vec& u) const;

private:
  int n_, dim_;
  double a0_, b1_, a1_, eps_;
  double mass_estimate_;
  std::vector<Vec> nodes_;
  std::vector<double> weights_;
};

/// Reference unit-ball bump mass per dimension (high-order radial quadrature).
double mollifier_a0(int dim);

namespace field {

struct LatticeData {
  int dim = 0, out_dim = 0;
  double lo = 0.0, pitch = 0.0;
  int npts = 0;                // per axis
  std::vector<double> values;  // npts^dim * out_dim, row-major over axes
};

}  // namespace field

/// State-dependent part of a drift: F(x) with b(x,y) = F(x) + B2*y.
class StateVecField {
public:
  static StateVecField affine(Mat a, Vec c);
  static StateVecField osgood(int dim, double amp);
  static StateVecField truncated(StateVecField inner, double radius);

  Vec eval(const Vec& x) const;
  bool affine_form() const;
  int dim() const { return dim_; }

  struct MollifiedForm;  // lattice + fallback convolution
  static StateVecField mollified(const StateVecField& inner, std::shared_ptr<const MollifierConfig> cfg,
                                 double lattice_halfwidth);

  StateVecField() = default;  // inert; factories establish the invariants

private:
  enum class Form { affine, osgood, truncated, mollified } form_ = Form::affine;
  int dim_ = 0;
  // affine
  Mat a_;
  Vec c_;
  // osgood
  double amp_ = 0.0;
  // truncated / mollified share the inner pointer
  std::shared_ptr<const StateVecField> inner_;
  double trunc_radius_ = 0.0;
  std::shared_ptr<const MollifierConfig> moll_;
  std::shared_ptr<const field::LatticeData> lattice_;
};

/// State part of the diffusion: S(x) = S0 + s1*diag(x), with
/// sigma(x,y) = S(x) + s2*diag(y).
class StateMatField {
public:
  static StateMatField affine(Mat s0, double s1);
  static StateMatField truncated(StateMatField inner, double radius);
  static StateMatField mollified(const StateMatField& inner, std::shared_ptr<const MollifierConfig> cfg,
                                 double lattice_halfwidth);

  Mat eval(const Vec& x) const;
  bool affine_form() const;
  int dim() const { return dim_; }

  StateMatField() = default;  // inert; factories establish the invariants

private:
  enum class Form { affine, truncated, mollified } form_ = Form::affine;
  int dim_ = 0;
  Mat s0_;
  double s1_ = 0.0;
  std::shared_ptr<const StateMatField> inner_;
  double trunc_radius_ = 0.0;
  std::shared_ptr<const MollifierConfig> moll_;
  std::shared_ptr<const field::LatticeData> lattice_;
};

/// State part of the jump gain: g(x) = g0 + <g1, x>, with
/// G(x,y,z) = (g(x) + <g2, y>) * (M z).
class StateScalarField {
public:
  static StateScalarField affine(double g0, Vec g1);
  static StateScalarField truncated(StateScalarField inner, double radius);
  static StateScalarField mollified(const StateScalarField& inner,
                                    std::shared_ptr<const MollifierConfig> cfg,
                                    double lattice_halfwidth);

  double eval(const Vec& x) const;
  bool affine_form() const;
  int dim() const { return dim_; }

  StateScalarField() = default;  // inert; factories establish the invariants

private:
  enum class Form { affine, truncated, mollified } form_ = Form::affine;
  int dim_ = 0;
  double g0_ = 0.0;
  Vec g1_;
  std::shared_ptr<const StateScalarField> inner_;
  double trunc_radius_ = 0.0;
  std::shared_ptr<const MollifierConfig> moll_;
  std::shared_ptr<const field::LatticeData> lattice_;
};

struct JumpPart {
  StateScalarField gain_state;  // g(x)
  Vec gain_measure;             // g2
  Mat mark_map;                 // d x m
};

/// Two-point coefficient kernels (b, sigma, G) from the closed catalog, with
/// declared growth/modulus metadata. Immutable after construction; safe to share.
class CoefficientKernel {
public:
  CoefficientKernel(int dim, StateVecField drift_state, Mat drift_measure,
                    StateMatField diff_state, double diff_measure,
                    std::optional<JumpPart> jump, double growth_l1, ModulusKind rho,
                    ModulusKind phi, double declared_l2 = 0.0);

  // catalog shortcuts
  static CoefficientKernel linear(Mat b1, Mat b2, Vec c, Mat sigma0, double growth_l1);
  static CoefficientKernel attraction(int dim, double kappa, Mat sigma0, double growth_l1);
  static CoefficientKernel osgood(int dim, double amp, double kappa, Mat sigma0, double growth_l1);

  int dim() const { return dim_; }
  bool has_jump() const { return jump_.has_value(); }
  int mark_dim() const { return jump_ ? static_cast<int>(jump_->mark_map.cols()) : 0; }

  // two-point evaluations
  Vec drift(const Vec& x, const Vec& y) const;
  Mat diffusion(const Vec& x, const Vec& y) const;
  Vec jump(const Vec& x, const Vec& y, const Vec& z) const;

  // mean-field functionals against a summary (exact for the catalog)
  Vec drift_mf(const Vec& x, const MeasureSummary& mu) const;
  Mat diffusion_mf(const Vec& x, const MeasureSummary& mu) const;
  double jump_gain_mf(const Vec& x, const MeasureSummary& mu) const;
  Vec jump_mf(const Vec& x, const MeasureSummary& mu, const Vec& z) const;

  // mean-field functionals by their definition (weighted sums over the cloud)
  Vec mean_field_drift(const Vec& x, const EmpiricalMeasure& mu) const;
  Mat mean_field_diffusion(const Vec& x, const EmpiricalMeasure& mu) const;
  Vec mean_field_jump(const Vec& x, const EmpiricalMeasure& mu, const Vec& z) const;

  const StateVecField& drift_state() const { return drift_state_; }
  const Mat& drift_measure() const { return drift_measure_; }
  const StateMatField& diff_state() const { return diff_state_; }
  double diff_measure() const { return diff_measure_; }
  const std::optional<JumpPart>& jump_part() const { return jump_; }

  double growth_l1() const { return growth_l1_; }
  double declared_l2() const { return declared_l2_; }
  ModulusKind rho() const { return rho_; }
  ModulusKind phi() const { return phi_; }

private:
  int dim_;
  StateVecField drift_state_;
  Mat drift_measure_;
  StateMatField diff_state_;
  double diff_measure_;
  std::optional<JumpPart> jump_;
  double growth_l1_;
  ModulusKind rho_, phi_;
  double declared_l2_;
};

/// Double convolution of all kernel parts with J^n in both arguments. State
/// parts that are affine are exactly invariant and pass through; the rest are
/// convolved on a lattice (pitch 1/(4n)) with multilinear interpolation and a
/// direct-quadrature fallback outside the lattice.
CoefficientKernel mollify(const CoefficientKernel& kernel, const MollifierConfig& config,
                          double lattice_halfwidth = 4.0);

/// Direct two-point double-quadrature evaluation of the mollified drift
/// (the independent oracle the lattice path is tested against).
Vec mollified_drift_direct(const CoefficientKernel& kernel, const MollifierConfig& config,
                           const Vec& x, const Vec& y);

/// Radially clamp the state argument to the ball of radius level before
/// evaluation; the measure argument is untouched.
CoefficientKernel truncate(const CoefficientKernel& kernel, double level);

struct ModulusReport {
  double max_ratio_drift_diff = 0.0;  // vs L2*(rho+rho)
  double max_ratio_jump = 0.0;        // vs L2*(phi+phi)
  bool violation = false;
  int samples = 0;
};

/// Sampled (H3) validator: reports the worst observed ratio of the coupled
/// drift/diffusion increment to rho(|x-x'|^2)+rho(W2^2), and the G-analogue
/// with phi. nu_mark_l2 is the precomputed second mark moment of nu when the
/// kernel has a jump part. Reporting-grade: flags if ratio > declared_l2*1.05.
ModulusReport modulus_check(const CoefficientKernel& kernel, int sample_budget, uint64_t seed,
                            std::optional<double> nu_mark_l2 = std::nullopt);

/// Sampled (H2) validator.
bool check_linear_growth(const CoefficientKernel& kernel, std::optional<double> nu_mark_l2,
                         int sample_budget, uint64_t seed, double* worst_ratio = nullptr);

}  // namespace mmv
