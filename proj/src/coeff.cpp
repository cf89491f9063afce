#include "mmv/coeff.hpp"

#include <cmath>
#include <numbers>

#include "mmv/rng.hpp"

namespace mmv {

double modulus(ModulusKind kind, double u) {
  if (u <= 0.0) return 0.0;
  switch (kind) {
    case ModulusKind::linear:
      return u;
    case ModulusKind::log_osgood: {
      constexpr double kInvE = 0.36787944117144233;
      if (u >= kInvE) return kInvE;
      return u * std::log(1.0 / u);
    }
  }
  throw std::logic_error("unreachable");
}

MeasureSummary summarize(const EmpiricalMeasure& mu) {
  return MeasureSummary{mu.mean(), mu.second_moment()};
}

namespace {

constexpr double kE = 2.718281828459045235360287471353;

double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace

double mollifier_a0(int dim) {
  // a0 = |S^{d-1}| * int_0^1 r^{d-1} exp(-1/(1-r^2)) dr, high-order radial rule
  std::vector<double> x, w;
  gauss_legendre(400, x, w);
  double radial = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = 0.5 * (x[i] + 1.0);
    radial += 0.5 * w[i] * std::pow(r, dim - 1) * bump(r * r);
  }
  const double surface = 2.0 * std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0);
  return surface * radial;
}

MollifierConfig::MollifierConfig(int n, int dim, Quadrature quad) : n_(n), dim_(dim) {
  if (n < 1) throw ConfigError("mollifier: n must be >= 1");
  if (dim < 1 || dim > kMaxDim) throw ConfigError("mollifier: dimension out of range");
  a0_ = mollifier_a0(dim);
  b1_ = std::pow(4.0 * n / a0_, 1.0 / (dim + 1));
  a1_ = b1_ / (4.0 * n);
  eps_ = b1_ / n;

  double raw_sum = 0.0;
  if (quad.kind == Quadrature::Kind::tensor_gauss) {
    std::vector<double> gx, gw;
    gauss_legendre(quad.points_per_axis, gx, gw);
    const int k = quad.points_per_axis;
    std::vector<int> idx(dim, 0);
    while (true) {
      Vec v(dim);
      double tw = 1.0;
      for (int a = 0; a < dim; ++a) {
        v[a] = gx[idx[a]];
        tw *= gw[idx[a]];
      }
      const double jw = tw * bump(v.squaredNorm());
      raw_sum += jw;
      if (jw > 0.0) {
        nodes_.push_back(v);
        weights_.push_back(jw);
      }
      int a = 0;
      for (; a < dim; ++a) {
        if (++idx[a] < k) break;
        idx[a] = 0;
      }
      if (a == dim) break;
    }
  } else {
    // stratified over the 2^dim orthants of the cube
    const int cells = 1 << dim;
    const int per_cell = std::max(1, quad.samples / cells);
    const double cell_vol = std::pow(2.0, dim) / cells;
    int id = 0;
    for (int cell = 0; cell < cells; ++cell) {
      for (int s = 0; s < per_cell; ++s) {
        CounterStream st(quad.seed, static_cast<uint32_t>(id++), 0, channel::sampler);
        Vec v(dim);
        for (int a = 0; a < dim; ++a) {
          const double u = st.u01();
          v[a] = (cell >> a) & 1 ? u : u - 1.0;
        }
        const double jw = cell_vol / per_cell * bump(v.squaredNorm());
        raw_sum += jw;
        if (jw > 0.0) {
          nodes_.push_back(v);
          weights_.push_back(jw);
        }
      }
    }
  }

  // raw_sum estimates integral of bump over the unit cube scaled by node density;
  // total kernel mass = a1 * b1^d * (estimate of a0)
  mass_estimate_ = a1_ * std::pow(b1_, dim) * raw_sum;
  if (std::abs(mass_estimate_ - 1.0) > quad.mass_tol)
    throw ConfigError("mollifier: quadrature budget too small to meet normalization check");
  double wsum = 0.0;
  for (double w : weights_) wsum += w;
  for (double& w : weights_) w /= wsum;
}

double MollifierConfig::kernel_value(const Vec& u) const {
  if (u.size() != dim_) throw UsageError("mollifier kernel_value: dimension mismatch");
  return a1_ * bump(u.squaredNorm() / (b1_ * b1_));
}

// ---------------------------------------------------------------------------
// lattice machinery

namespace {

using field::LatticeData;

template <typename EvalFn>
std::shared_ptr<LatticeData> build_lattice(int dim, int out_dim, double halfwidth, double pitch,
                                           const EvalFn& eval) {
  auto lat = std::make_shared<LatticeData>();
  lat->dim = dim;
  lat->out_dim = out_dim;
  lat->pitch = pitch;
  const int half = static_cast<int>(std::ceil(halfwidth / pitch));
  lat->npts = 2 * half + 1;
  lat->lo = -half * pitch;
  size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= lat->npts;
  lat->values.resize(total * out_dim);
  std::vector<int> idx(dim, 0);
  for (size_t flat = 0; flat < total; ++flat) {
    Vec x(dim);
    for (int a = 0; a < dim; ++a) x[a] = lat->lo + idx[a] * pitch;
    eval(x, &lat->values[flat * out_dim]);
    for (int a = 0; a < dim; ++a) {
      if (++idx[a] < lat->npts) break;
      idx[a] = 0;
    }
  }
  return lat;
}

bool lattice_covers(const LatticeData& lat, const Vec& x) {
  const double hi = lat.lo + (lat.npts - 1) * lat.pitch;
  for (int a = 0; a < lat.dim; ++a)
    if (x[a] < lat.lo || x[a] > hi) return false;
  return true;
}

void lattice_interp(const LatticeData& lat, const Vec& x, double* out) {
  const int d = lat.dim;
  int base[kMaxDim];
  double frac[kMaxDim];
  size_t stride[kMaxDim];
  size_t s = 1;
  for (int a = 0; a < d; ++a) {
    double t = (x[a] - lat.lo) / lat.pitch;
    int i = static_cast<int>(std::floor(t));
    i = std::min(std::max(i, 0), lat.npts - 2);
    base[a] = i;
    frac[a] = std::min(std::max(t - i, 0.0), 1.0);
    stride[a] = s;
    s *= lat.npts;
  }
  for (int k = 0; k < lat.out_dim; ++k) out[k] = 0.0;
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    size_t flat = 0;
    for (int a = 0; a < d; ++a) {
      const int bit = (c >> a) & 1;
      w *= bit ? frac[a] : 1.0 - frac[a];
      flat += stride[a] * (base[a] + bit);
    }
    const double* v = &lat.values[flat * lat.out_dim];
    for (int k = 0; k < lat.out_dim; ++k) out[k] += w * v[k];
  }
}

Vec clamp_radius(const Vec& x, double radius) {
  const double r = x.norm();
  if (r <= radius) return x;
  return x * (radius / r);
}

}  // namespace

// ---------------------------------------------------------------------------
// StateVecField

StateVecField StateVecField::affine(Mat a, Vec c) {
  StateVecField f;
  f.form_ = Form::affine;
  f.dim_ = static_cast<int>(c.size());
  if (a.rows() != f.dim_ || a.cols() != f.dim_) throw ConfigError("drift: matrix shape mismatch");
  f.a_ = std::move(a);
  f.c_ = std::move(c);
  return f;
}

StateVecField StateVecField::osgood(int dim, double amp) {
  StateVecField f;
  f.form_ = Form::osgood;
  f.dim_ = dim;
  f.amp_ = amp;
  return f;
}

StateVecField StateVecField::truncated(StateVecField inner, double radius) {
  if (!(radius > 0.0)) throw UsageError("truncate: level must be > 0");
  StateVecField f;
  f.form_ = Form::truncated;
  f.dim_ = inner.dim();
  f.trunc_radius_ = radius;
  f.inner_ = std::make_shared<const StateVecField>(std::move(inner));
  return f;
}

StateVecField StateVecField::mollified(const StateVecField& inner,
                                       std::shared_ptr<const MollifierConfig> cfg,
                                       double lattice_halfwidth) {
  StateVecField f;
  f.form_ = Form::mollified;
  f.dim_ = inner.dim();
  f.inner_ = std::make_shared<const StateVecField>(inner);
  f.moll_ = cfg;
  const double pitch = 1.0 / (4.0 * cfg->n());
  auto conv = [&f](const Vec& x, double* out) {
    Vec acc = Vec::Zero(f.dim_);
    const auto& nodes = f.moll_->nodes();
    const auto& w = f.moll_->weights();
    const double eps = f.moll_->eps();
    for (size_t k = 0; k < nodes.size(); ++k) acc += w[k] * f.inner_->eval(x - eps * nodes[k]);
    for (int i = 0; i < f.dim_; ++i) out[i] = acc[i];
  };
  f.lattice_ = build_lattice(f.dim_, f.dim_, lattice_halfwidth, pitch, conv);
  return f;
}

Vec StateVecField::eval(const Vec& x) const {
  switch (form_) {
    case Form::affine:
      return a_ * x + c_;
    case Form::osgood: {
      const double r = x.norm();
      if (r <= 0.0) return Vec::Zero(dim_);
      if (r <= kE) return Vec(amp_ * std::log(r) * x);
      return Vec(amp_ * ((kE + 2.0 * (r - kE)) / r) * x);
    }
    case Form::truncated:
      return inner_->eval(clamp_radius(x, trunc_radius_));
    case Form::mollified: {
      if (lattice_covers(*lattice_, x)) {
        Vec out(dim_);
        lattice_interp(*lattice_, x, out.data());
        return out;
      }
      Vec acc = Vec::Zero(dim_);
      const double eps = moll_->eps();
      for (size_t k = 0; k < moll_->nodes().size(); ++k)
        acc += moll_->weights()[k] * inner_->eval(x - eps * moll_->nodes()[k]);
      return acc;
    }
  }
  throw std::logic_error("unreachable");
}

bool StateVecField::affine_form() const { return form_ == Form::affine; }

// ---------------------------------------------------------------------------
// StateMatField

StateMatField StateMatField::affine(Mat s0, double s1) {
  StateMatField f;
  f.form_ = Form::affine;
  f.dim_ = static_cast<int>(s0.rows());
  if (s0.cols() != f.dim_) throw ConfigError("diffusion: matrix must be square");
  f.s0_ = std::move(s0);
  f.s1_ = s1;
  return f;
}

StateMatField StateMatField::truncated(StateMatField inner, double radius) {
  StateMatField f;
  f.form_ = Form::truncated;
  f.dim_ = inner.dim();
  f.trunc_radius_ = radius;
  f.inner_ = std::make_shared<const StateMatField>(std::move(inner));
  return f;
}

StateMatField StateMatField::mollified(const StateMatField& inner,
                                       std::shared_ptr<const MollifierConfig> cfg,
                                       double lattice_halfwidth) {
  StateMatField f;
  f.form_ = Form::mollified;
  f.dim_ = inner.dim();
  f.inner_ = std::make_shared<const StateMatField>(inner);
  f.moll_ = cfg;
  const int d = f.dim_;
  const double pitch = 1.0 / (4.0 * cfg->n());
  auto conv = [&f, d](const Vec& x, double* out) {
    Mat acc = Mat::Zero(d, d);
    const double eps = f.moll_->eps();
    for (size_t k = 0; k < f.moll_->nodes().size(); ++k)
      acc += f.moll_->weights()[k] * f.inner_->eval(x - eps * f.moll_->nodes()[k]);
    for (int j = 0; j < d * d; ++j) out[j] = acc.data()[j];
  };
  f.lattice_ = build_lattice(d, d * d, lattice_halfwidth, pitch, conv);
  return f;
}

Mat StateMatField::eval(const Vec& x) const {
  switch (form_) {
    case Form::affine: {
      Mat out = s0_;
      if (s1_ != 0.0) out += s1_ * Mat(x.asDiagonal());
      return out;
    }
    case Form::truncated:
      return inner_->eval(clamp_radius(x, trunc_radius_));
    case Form::mollified: {
      if (lattice_covers(*lattice_, x)) {
        Mat out(dim_, dim_);
        lattice_interp(*lattice_, x, out.data());
        return out;
      }
      Mat acc = Mat::Zero(dim_, dim_);
      const double eps = moll_->eps();
      for (size_t k = 0; k < moll_->nodes().size(); ++k)
        acc += moll_->weights()[k] * inner_->eval(x - eps * moll_->nodes()[k]);
      return acc;
    }
  }
  throw std::logic_error("unreachable");
}

bool StateMatField::affine_form() const { return form_ == Form::affine; }

// ---------------------------------------------------------------------------
// StateScalarField

StateScalarField StateScalarField::affine(double g0, Vec g1) {
  StateScalarField f;
  f.form_ = Form::affine;
  f.dim_ = static_cast<int>(g1.size());
  f.g0_ = g0;
  f.g1_ = std::move(g1);
  return f;
}

StateScalarField StateScalarField::truncated(StateScalarField inner, double radius) {
  StateScalarField f;
  f.form_ = Form::truncated;
  f.dim_ = inner.dim();
  f.trunc_radius_ = radius;
  f.inner_ = std::make_shared<const StateScalarField>(std::move(inner));
  return f;
}

StateScalarField StateScalarField::mollified(const StateScalarField& inner,
                                             std::shared_ptr<const MollifierConfig> cfg,
                                             double lattice_halfwidth) {
  StateScalarField f;
  f.form_ = Form::mollified;
  f.dim_ = inner.dim();
  f.inner_ = std::make_shared<const StateScalarField>(inner);
  f.moll_ = cfg;
  const double pitch = 1.0 / (4.0 * cfg->n());
  auto conv = [&f](const Vec& x, double* out) {
    double acc = 0.0;
    const double eps = f.moll_->eps();
    for (size_t k = 0; k < f.moll_->nodes().size(); ++k)
      acc += f.moll_->weights()[k] * f.inner_->eval(x - eps * f.moll_->nodes()[k]);
    out[0] = acc;
  };
  f.lattice_ = build_lattice(f.dim_, 1, lattice_halfwidth, pitch, conv);
  return f;
}

double StateScalarField::eval(const Vec& x) const {
  switch (form_) {
    case Form::affine:
      return g0_ + g1_.dot(x);
    case Form::truncated:
      return inner_->eval(clamp_radius(x, trunc_radius_));
    case Form::mollified: {
      if (lattice_covers(*lattice_, x)) {
        double out;
        lattice_interp(*lattice_, x, &out);
        return out;
      }
      double acc = 0.0;
      const double eps = moll_->eps();
      for (size_t k = 0; k < moll_->nodes().size(); ++k)
        acc += moll_->weights()[k] * inner_->eval(x - eps * moll_->nodes()[k]);
      return acc;
    }
  }
  throw std::logic_error("unreachable");
}

bool StateScalarField::affine_form() const { return form_ == Form::affine; }

// ---------------------------------------------------------------------------
// CoefficientKernel

CoefficientKernel::CoefficientKernel(int dim, StateVecField drift_state, Mat drift_measure,
                                     StateMatField diff_state, double diff_measure,
                                     std::optional<JumpPart> jump, double growth_l1,
                                     ModulusKind rho, ModulusKind phi, double declared_l2)
    : dim_(dim),
      drift_state_(std::move(drift_state)),
      drift_measure_(std::move(drift_measure)),
      diff_state_(std::move(diff_state)),
      diff_measure_(diff_measure),
      jump_(std::move(jump)),
      growth_l1_(growth_l1),
      rho_(rho),
      phi_(phi),
      declared_l2_(declared_l2) {
  if (drift_state_.dim() != dim || diff_state_.dim() != dim ||
      drift_measure_.rows() != dim || drift_measure_.cols() != dim)
    throw ConfigError("kernel: dimension mismatch");
  if (!(growth_l1 > 0.0)) throw ConfigError("kernel: growth constant L1 must be > 0");
  if (jump_ && (jump_->gain_state.dim() != dim || jump_->gain_measure.size() != dim ||
                jump_->mark_map.rows() != dim))
    throw ConfigError("kernel: jump part dimension mismatch");
}

CoefficientKernel CoefficientKernel::linear(Mat b1, Mat b2, Vec c, Mat sigma0, double growth_l1) {
  const int d = static_cast<int>(c.size());
  return CoefficientKernel(d, StateVecField::affine(std::move(b1), std::move(c)), std::move(b2),
                           StateMatField::affine(std::move(sigma0), 0.0), 0.0, std::nullopt,
                           growth_l1, ModulusKind::linear, ModulusKind::linear);
}

CoefficientKernel CoefficientKernel::attraction(int dim, double kappa, Mat sigma0,
                                                double growth_l1) {
  return CoefficientKernel(
      dim, StateVecField::affine(-kappa * Mat::Identity(dim, dim), Vec::Zero(dim)),
      kappa * Mat::Identity(dim, dim), StateMatField::affine(std::move(sigma0), 0.0), 0.0,
      std::nullopt, growth_l1, ModulusKind::linear, ModulusKind::linear);
}

CoefficientKernel CoefficientKernel::osgood(int dim, double amp, double kappa, Mat sigma0,
                                            double growth_l1) {
  return CoefficientKernel(dim, StateVecField::osgood(dim, amp), kappa * Mat::Identity(dim, dim),
                           StateMatField::affine(std::move(sigma0), 0.0), 0.0, std::nullopt,
                           growth_l1, ModulusKind::log_osgood, ModulusKind::linear);
}

Vec CoefficientKernel::drift(const Vec& x, const Vec& y) const {
  return drift_state_.eval(x) + drift_measure_ * y;
}

Mat CoefficientKernel::diffusion(const Vec& x, const Vec& y) const {
  Mat out = diff_state_.eval(x);
  if (diff_measure_ != 0.0) out += diff_measure_ * Mat(y.asDiagonal());
  return out;
}

Vec CoefficientKernel::jump(const Vec& x, const Vec& y, const Vec& z) const {
  if (!jump_) throw UsageError("kernel has no jump part");
  const double gain = jump_->gain_state.eval(x) + jump_->gain_measure.dot(y);
  return gain * (jump_->mark_map * z);
}

Vec CoefficientKernel::drift_mf(const Vec& x, const MeasureSummary& mu) const {
  return drift_state_.eval(x) + drift_measure_ * mu.mean;
}

Mat CoefficientKernel::diffusion_mf(const Vec& x, const MeasureSummary& mu) const {
  Mat out = diff_state_.eval(x);
  if (diff_measure_ != 0.0) out += diff_measure_ * Mat(mu.mean.asDiagonal());
  return out;
}

double CoefficientKernel::jump_gain_mf(const Vec& x, const MeasureSummary& mu) const {
  if (!jump_) return 0.0;
  return jump_->gain_state.eval(x) + jump_->gain_measure.dot(mu.mean);
}

Vec CoefficientKernel::jump_mf(const Vec& x, const MeasureSummary& mu, const Vec& z) const {
  if (!jump_) throw UsageError("kernel has no jump part");
  return jump_gain_mf(x, mu) * (jump_->mark_map * z);
}

Vec CoefficientKernel::mean_field_drift(const Vec& x, const EmpiricalMeasure& mu) const {
  Vec acc = Vec::Zero(dim_);
  for (int i = 0; i < mu.size(); ++i) acc += mu.weight(i) * drift(x, mu.point(i));
  return acc;
}

Mat CoefficientKernel::mean_field_diffusion(const Vec& x, const EmpiricalMeasure& mu) const {
  Mat acc = Mat::Zero(dim_, dim_);
  for (int i = 0; i < mu.size(); ++i) acc += mu.weight(i) * diffusion(x, mu.point(i));
  return acc;
}

Vec CoefficientKernel::mean_field_jump(const Vec& x, const EmpiricalMeasure& mu,
                                       const Vec& z) const {
  Vec acc = Vec::Zero(dim_);
  for (int i = 0; i < mu.size(); ++i) acc += mu.weight(i) * jump(x, mu.point(i), z);
  return acc;
}

// ---------------------------------------------------------------------------

CoefficientKernel mollify(const CoefficientKernel& kernel, const MollifierConfig& config,
                          double lattice_halfwidth) {
  if (config.dim() != kernel.dim()) throw UsageError("mollify: dimension mismatch");
  auto cfg = std::make_shared<const MollifierConfig>(config);

  StateVecField drift = kernel.drift_state().affine_form()
                            ? kernel.drift_state()
                            : StateVecField::mollified(kernel.drift_state(), cfg, lattice_halfwidth);
  StateMatField diff = kernel.diff_state().affine_form()
                           ? kernel.diff_state()
                           : StateMatField::mollified(kernel.diff_state(), cfg, lattice_halfwidth);
  std::optional<JumpPart> jp = kernel.jump_part();
  if (jp && !jp->gain_state.affine_form())
    jp->gain_state = StateScalarField::mollified(jp->gain_state, cfg, lattice_halfwidth);

  // Lemma 3.1 (i): growth constant independent of n; the convolution shifts
  // contribute at most L1*(1/2 + 2*eps) with eps = b1/n decreasing in n.
  const double l1 = kernel.growth_l1() * (1.5 + 2.0 * config.eps());
  return CoefficientKernel(kernel.dim(), std::move(drift), kernel.drift_measure(), std::move(diff),
                           kernel.diff_measure(), std::move(jp), l1, kernel.rho(), kernel.phi(),
                           kernel.declared_l2());
}

Vec mollified_drift_direct(const CoefficientKernel& kernel, const MollifierConfig& config,
                           const Vec& x, const Vec& y) {
  const auto& nodes = config.nodes();
  const auto& w = config.weights();
  const double eps = config.eps();
  Vec acc = Vec::Zero(kernel.dim());
  for (size_t i = 0; i < nodes.size(); ++i) {
    Vec xi = x - eps * nodes[i];
    Vec inner = Vec::Zero(kernel.dim());
    for (size_t j = 0; j < nodes.size(); ++j) inner += w[j] * kernel.drift(xi, y - eps * nodes[j]);
    acc += w[i] * inner;
  }
  return acc;
}

CoefficientKernel truncate(const CoefficientKernel& kernel, double level) {
  if (!(level > 0.0)) throw UsageError("truncate: level must be > 0");
  std::optional<JumpPart> jp = kernel.jump_part();
  if (jp) jp->gain_state = StateScalarField::truncated(jp->gain_state, level);
  return CoefficientKernel(kernel.dim(), StateVecField::truncated(kernel.drift_state(), level),
                           kernel.drift_measure(),
                           StateMatField::truncated(kernel.diff_state(), level),
                           kernel.diff_measure(), std::move(jp), kernel.growth_l1(), kernel.rho(),
                           kernel.phi(), kernel.declared_l2());
}

// ---------------------------------------------------------------------------
// sampled hypothesis validators

namespace {

EmpiricalMeasure random_cloud(CounterStream& st, int dim, int npts, double center_scale,
                              double spread) {
  std::vector<Vec> pts;
  pts.reserve(npts);
  Vec center(dim);
  for (int a = 0; a < dim; ++a) center[a] = center_scale * st.normal();
  for (int i = 0; i < npts; ++i) {
    Vec p = center;
    for (int a = 0; a < dim; ++a) p[a] += spread * st.normal();
    pts.push_back(p);
  }
  return EmpiricalMeasure(std::move(pts));
}

double exact_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  return a.dim() == 1 ? wasserstein2(a, b, W2Method::exact_1d)
                      : wasserstein2(a, b, W2Method::exact_assignment);
}

}  // namespace

ModulusReport modulus_check(const CoefficientKernel& kernel, int sample_budget, uint64_t seed,
                            std::optional<double> nu_mark_l2) {
  ModulusReport rep;
  rep.samples = sample_budget;
  const int d = kernel.dim();
  for (int s = 0; s < sample_budget; ++s) {
    CounterStream st(seed, static_cast<uint32_t>(s), 0, channel::sampler);
    Vec x(d);
    for (int a = 0; a < d; ++a) x[a] = st.normal();
    // pair distance log-uniform in [1e-4, 1] to probe the modulus near 0
    const double delta = std::pow(10.0, -4.0 + 4.0 * st.u01());
    Vec dir(d);
    for (int a = 0; a < d; ++a) dir[a] = st.normal();
    if (dir.norm() < 1e-12) dir[0] = 1.0;
    Vec xp = x + delta * dir.normalized();

    EmpiricalMeasure mu = random_cloud(st, d, 8, 1.0, 0.5);
    std::vector<Vec> shifted = mu.points();
    const double mshift = delta * st.u01();
    for (auto& p : shifted)
      for (int a = 0; a < d; ++a) p[a] += mshift * st.normal() / std::sqrt(double(d));
    EmpiricalMeasure mup(std::move(shifted));

    const MeasureSummary smu = summarize(mu), smup = summarize(mup);
    const double w2 = exact_w2(mu, mup);
    const double rhs =
        modulus(kernel.rho(), delta * delta) + modulus(kernel.rho(), w2 * w2);

    const Vec db = kernel.drift_mf(x, smu) - kernel.drift_mf(xp, smup);
    const Mat ds = kernel.diffusion_mf(x, smu) - kernel.diffusion_mf(xp, smup);
    const double lhs = (x - xp).dot(db) + ds.squaredNorm();
    if (rhs > 0.0) rep.max_ratio_drift_diff = std::max(rep.max_ratio_drift_diff, lhs / rhs);

    if (kernel.has_jump() && nu_mark_l2) {
      const double dg = kernel.jump_gain_mf(x, smu) - kernel.jump_gain_mf(xp, smup);
      const double lhs_g = dg * dg * (*nu_mark_l2);
      const double rhs_g =
          modulus(kernel.phi(), delta * delta) + modulus(kernel.phi(), w2 * w2);
      if (rhs_g > 0.0) rep.max_ratio_jump = std::max(rep.max_ratio_jump, lhs_g / rhs_g);
    }
  }
  if (kernel.declared_l2() > 0.0) {
    const double cap = kernel.declared_l2() * 1.05;
    rep.violation = rep.max_ratio_drift_diff > cap || rep.max_ratio_jump > cap;
  }
  return rep;
}

bool check_linear_growth(const CoefficientKernel& kernel, std::optional<double> nu_mark_l2,
                         int sample_budget, uint64_t seed, double* worst_ratio) {
  const int d = kernel.dim();
  double worst = 0.0;
  for (int s = 0; s < sample_budget; ++s) {
    CounterStream st(seed, static_cast<uint32_t>(s), 1, channel::sampler);
    Vec x(d), y(d);
    for (int a = 0; a < d; ++a) x[a] = 3.0 * st.normal();
    for (int a = 0; a < d; ++a) y[a] = 3.0 * st.normal();
    const double l1 = kernel.growth_l1();
    const double r1 = kernel.drift(x, y).norm() / (l1 * (1.0 + x.norm() + y.norm()));
    double q = kernel.diffusion(x, y).squaredNorm();
    if (kernel.has_jump() && nu_mark_l2) {
      // G(x,y,z) = gain(x,y) * (M z), so int |G|^2 nu <= gain^2 * int |M z|^2 nu
      const auto& jp = *kernel.jump_part();
      const double gain = jp.gain_state.eval(x) + jp.gain_measure.dot(y);
      q += gain * gain * (*nu_mark_l2);
    }
    const double r2 = q / (l1 * (1.0 + x.squaredNorm() + y.squaredNorm()));
    worst = std::max({worst, r1, r2});
  }
  if (worst_ratio) *worst_ratio = worst;
  return worst <= 1.0 + 1e-9;
}

}  // namespace mmv
