#include "mmv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmv {

// ---------------------------------------------------------------------------
// TestFunction

TestFunction TestFunction::bump(Vec center, double radius) {
  if (!(radius > 0.0)) throw UsageError("bump: radius > 0");
  TestFunction f;
  f.kind_ = Kind::bump;
  f.dim_ = static_cast<int>(center.size());
  f.center_ = std::move(center);
  f.radius_ = radius;
  f.name_ = "bump(r=" + std::to_string(radius) + ")";
  return f;
}

TestFunction TestFunction::quadratic_window(double r_inner, double r_outer, int dim) {
  if (!(0.0 < r_inner && r_inner < r_outer)) throw UsageError("quadratic_window: 0 < r_in < r_out");
  TestFunction f;
  f.kind_ = Kind::quadratic_window;
  f.dim_ = dim;
  f.r_in_ = r_inner;
  f.r_out_ = r_outer;
  f.name_ = "quad_window";
  return f;
}

namespace {

// quintic smoothstep: s(0)=0, s(1)=1, s'=s''=0 at both ends (C^2 cutoff)
inline double sstep(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
inline double sstep_d(double t) { return 30.0 * t * t * (1.0 + t * (-2.0 + t)); }
inline double sstep_dd(double t) { return t * (60.0 + t * (-180.0 + 120.0 * t)); }

}  // namespace

double TestFunction::value(const Vec& x) const {
  if (kind_ == Kind::bump) {
    const double u = (x - center_).squaredNorm() / (radius_ * radius_);
    if (u >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u));
  }
  const double u = x.squaredNorm();
  const double a2 = r_in_ * r_in_, b2 = r_out_ * r_out_;
  if (u >= b2) return 0.0;
  if (u <= a2) return u;
  return u * sstep((b2 - u) / (b2 - a2));
}

Vec TestFunction::gradient(const Vec& x) const {
  if (kind_ == Kind::bump) {
    const Vec rho = x - center_;
    const double r2 = radius_ * radius_;
    const double u = rho.squaredNorm() / r2;
    if (u >= 1.0) return Vec::Zero(dim_);
    const double e = std::exp(-1.0 / (1.0 - u));
    const double ep = -e / ((1.0 - u) * (1.0 - u));
    return Vec(ep * (2.0 / r2) * rho);
  }
  const double u = x.squaredNorm();
  const double a2 = r_in_ * r_in_, b2 = r_out_ * r_out_;
  if (u >= b2) return Vec::Zero(dim_);
  double fp;  // d/du of u*w(u)
  if (u <= a2) {
    fp = 1.0;
  } else {
    const double t = (b2 - u) / (b2 - a2);
    fp = sstep(t) + u * sstep_d(t) * (-1.0 / (b2 - a2));
  }
  return Vec(2.0 * fp * x);
}

Mat TestFunction::hessian(const Vec& x) const {
  if (kind_ == Kind::bump) {
    const Vec rho = x - center_;
    const double r2 = radius_ * radius_;
    const double u = rho.squaredNorm() / r2;
    if (u >= 1.0) return Mat::Zero(dim_, dim_);
    const double om = 1.0 - u;
    const double e = std::exp(-1.0 / om);
    const double ep = -e / (om * om);
    const double epp = e * (1.0 / (om * om * om * om) - 2.0 / (om * om * om));
    Vec gu = (2.0 / r2) * rho;
    return Mat(epp * gu * gu.transpose() + ep * (2.0 / r2) * Mat::Identity(dim_, dim_));
  }
  const double u = x.squaredNorm();
  const double a2 = r_in_ * r_in_, b2 = r_out_ * r_out_;
  if (u >= b2) return Mat::Zero(dim_, dim_);
  double fp, fpp;
  if (u <= a2) {
    fp = 1.0;
    fpp = 0.0;
  } else {
    const double span = b2 - a2;
    const double t = (b2 - u) / span;
    fp = sstep(t) - u * sstep_d(t) / span;
    fpp = -2.0 * sstep_d(t) / span + u * sstep_dd(t) / (span * span);
  }
  return Mat(4.0 * fpp * x * x.transpose() + 2.0 * fp * Mat::Identity(dim_, dim_));
}

// ---------------------------------------------------------------------------
// A-membership

namespace {

struct DyadicWindows {
  // [lo, hi) index pairs over base steps: every dyadic level plus the full range
  std::vector<std::pair<int, int>> windows;
  explicit DyadicWindows(int m) {
    for (int len = 1; len <= m; len *= 2)
      for (int lo = 0; lo < m; lo += len) windows.emplace_back(lo, std::min(lo + len, m));
    if ((m & (m - 1)) != 0) windows.emplace_back(0, m);
  }
};

void require_full_record(const SolutionEnsemble& ens, const char* who) {
  if (!ens.has_step_stats) throw UsageError(std::string(who) + ": ensemble lacks step statistics");
  if (static_cast<int>(ens.snapshot_steps.size()) != ens.steps() + 1)
    throw UsageError(std::string(who) + ": ensemble needs snapshots at every base time");
}

}  // namespace

PairCheckReport check_pair_in_A(const SolutionEnsemble& ens, const std::vector<GraphPair>& pairs,
                                double tol) {
  require_full_record(ens, "check_pair_in_A");
  const int m = ens.steps(), n = ens.particles, d = ens.dim;
  DyadicWindows dy(m);

  PairCheckReport rep;
  rep.pairs = static_cast<int>(pairs.size());
  rep.particles = n;
  rep.windows = static_cast<int>(dy.windows.size());
  rep.worst_margin = std::numeric_limits<double>::infinity();

  std::vector<double> q(m), prefix(m + 1);
  for (int p = 0; p < n; ++p) {
    for (const auto& pair : pairs) {
      const Vec& x = pair.x;
      const Vec& xs = pair.xstar;
      for (int k = 0; k < m; ++k) {
        const double h = ens.grid[k + 1] - ens.grid[k];
        const StepOverrideRecord* ov = ens.override_for(p, k);
        if (ov) {
          double acc = 0.0;
          for (const auto& sub : ov->subs)
            acc += (sub.x_new - x).dot(sub.dk) - sub.h * (sub.x_new - x).dot(xs);
          q[k] = acc;
        } else {
          const size_t at = static_cast<size_t>(p) * m + k;
          double xdot_s3 = 0.0, xn_dot_xs = 0.0, x_dot_xs = x.dot(xs);
          const double* s3 = &ens.s3[at * d];
          const double* xn = &ens.snapshots[k + 1][static_cast<size_t>(p) * d];
          for (int a = 0; a < d; ++a) {
            xdot_s3 += x[a] * s3[a];
            xn_dot_xs += xn[a] * xs[a];
          }
          q[k] = ens.s1[at] - xdot_s3 - h * (xn_dot_xs - x_dot_xs);
        }
      }
      prefix[0] = 0.0;
      for (int k = 0; k < m; ++k) prefix[k + 1] = prefix[k] + q[k];
      for (const auto& [lo, hi] : dy.windows) {
        const double margin = prefix[hi] - prefix[lo];
        if (margin < rep.worst_margin) {
          rep.worst_margin = margin;
          rep.worst_particle = p;
          rep.worst_window_lo = lo;
          rep.worst_window_hi = hi;
        }
      }
    }
  }
  rep.pass = rep.worst_margin >= -tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Cepa

CepaReport cepa_report(const SolutionEnsemble& ens, const ConvexDomain& domain, const Vec& a0) {
  require_full_record(ens, "cepa_report");
  if (domain.boundary_distance(a0) <= 0.0 || domain.distance(a0) > 0.0)
    throw UsageError("cepa_report: a0 must be strictly interior");
  const int m = ens.steps(), n = ens.particles, d = ens.dim;
  DyadicWindows dy(m);

  // per particle, per step: lhs_k = s1 - <a0, s3>, ktv_k = s5, int_k = |X_k - a0| h
  std::vector<double> lhs(static_cast<size_t>(n) * m), ktv(static_cast<size_t>(n) * m),
      integ(static_cast<size_t>(n) * m);
  for (int p = 0; p < n; ++p) {
    for (int k = 0; k < m; ++k) {
      const size_t at = static_cast<size_t>(p) * m + k;
      double a0s3 = 0.0, xdist = 0.0;
      const double* s3 = &ens.s3[at * d];
      const double* xk = &ens.snapshots[k][static_cast<size_t>(p) * d];
      for (int a = 0; a < d; ++a) {
        a0s3 += a0[a] * s3[a];
        const double diff = xk[a] - a0[a];
        xdist += diff * diff;
      }
      lhs[at] = ens.s1[at] - a0s3;
      ktv[at] = ens.s5[at];
      integ[at] = std::sqrt(xdist) * (ens.grid[k + 1] - ens.grid[k]);
    }
  }

  CepaReport rep;
  // particle-averaged rows per window
  for (const auto& [lo, hi] : dy.windows) {
    CepaRow row;
    row.s = ens.grid[lo];
    row.t = ens.grid[hi];
    for (int p = 0; p < n; ++p) {
      const size_t base = static_cast<size_t>(p) * m;
      for (int k = lo; k < hi; ++k) {
        row.lhs += lhs[base + k];
        row.ktv += ktv[base + k];
        row.integral += integ[base + k];
      }
    }
    row.lhs /= n;
    row.ktv /= n;
    row.integral /= n;
    rep.rows.push_back(row);
  }

  // best-fit constants over per-particle constraints:
  //   lhs >= kappa1*ktv - kappa2*integral - kappa3*(t-s)
  const double kgrid[] = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  double best_k1 = -std::numeric_limits<double>::infinity(), best_k2 = 0.0, best_k3 = 0.0;
  bool any_ktv = false;
  for (double k2 : kgrid) {
    for (double k3 : kgrid) {
      double k1 = std::numeric_limits<double>::infinity();
      for (int p = 0; p < n; ++p) {
        const size_t base = static_cast<size_t>(p) * m;
        for (const auto& [lo, hi] : dy.windows) {
          double l = 0.0, kv = 0.0, ig = 0.0;
          for (int k = lo; k < hi; ++k) {
            l += lhs[base + k];
            kv += ktv[base + k];
            ig += integ[base + k];
          }
          if (kv < 1e-12) continue;
          any_ktv = true;
          k1 = std::min(k1, (l + k2 * ig + k3 * (ens.grid[hi] - ens.grid[lo])) / kv);
        }
      }
      if (std::isfinite(k1) && k1 > best_k1) {
        best_k1 = k1;
        best_k2 = k2;
        best_k3 = k3;
      }
    }
  }
  if (!any_ktv) {
    rep.unconstrained = true;
    rep.kappa1 = 1.0;  // any kappa1 > 0 fits when K never moves
  } else {
    rep.kappa1 = best_k1;
    rep.kappa2 = best_k2;
    rep.kappa3 = best_k3;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Aldous

AldousReport aldous_modulus(const SolutionEnsemble& ens, const std::vector<double>& deltas,
                            double rho, int max_probe_times) {
  if (ens.snapshots.size() < 2) throw UsageError("aldous_modulus: needs snapshots");
  for (double d : deltas)
    if (!(d > 0.0 && d <= 1.0)) throw UsageError("aldous_modulus: deltas in (0,1]");

  // probe grid: thin the snapshots to at most max_probe_times
  const int total = static_cast<int>(ens.snapshot_steps.size());
  const int stride = std::max(1, (total + max_probe_times - 1) / max_probe_times);
  std::vector<int> probe;
  for (int i = 0; i < total; i += stride) probe.push_back(i);
  if (probe.back() != total - 1) probe.push_back(total - 1);

  const int n = ens.particles, d = ens.dim;
  AldousReport rep;
  rep.deltas = deltas;
  rep.modulus.assign(deltas.size(), 0.0);
  double delta_max = 0.0;
  for (double del : deltas) delta_max = std::max(delta_max, del);

  for (size_t i = 0; i < probe.size(); ++i) {
    for (size_t j = i + 1; j < probe.size(); ++j) {
      const double gap = ens.grid[ens.snapshot_steps[probe[j]]] - ens.grid[ens.snapshot_steps[probe[i]]];
      if (gap > delta_max) break;
      int exceed = 0;
      const auto& a = ens.snapshots[probe[i]];
      const auto& b = ens.snapshots[probe[j]];
      for (int p = 0; p < n; ++p) {
        double dist2 = 0.0;
        for (int c = 0; c < d; ++c) {
          const double diff = b[static_cast<size_t>(p) * d + c] - a[static_cast<size_t>(p) * d + c];
          dist2 += diff * diff;
        }
        if (dist2 > rho * rho) ++exceed;
      }
      const double frac = static_cast<double>(exceed) / n;
      for (size_t k = 0; k < deltas.size(); ++k)
        if (gap <= deltas[k]) rep.modulus[k] = std::max(rep.modulus[k], frac);
    }
  }

  // tail ladder from the path suprema
  double mean_sup2 = 0.0;
  for (int p = 0; p < n; ++p) mean_sup2 += ens.sup_sq[p];
  mean_sup2 /= n;
  const double a_top = 10.0 * std::sqrt(1.0 + mean_sup2);
  for (int k = 1; k <= 10; ++k) {
    const double a = a_top * k / 10.0;
    int count = 0;
    for (int p = 0; p < n; ++p)
      if (std::sqrt(ens.sup_sq[p]) >= a) ++count;
    rep.tail_a.push_back(a);
    rep.tail_p.push_back(static_cast<double>(count) / n);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// martingale defect

std::vector<DefectEntry> martingale_defect(const SolutionEnsemble& ens,
                                           const std::vector<TestFunction>& fs,
                                           const CoefficientKernel& kernel, const LevyConfig& levy,
                                           const std::vector<std::pair<double, double>>& st_pairs,
                                           const std::vector<GammaFunctional>& gammas,
                                           GeneratorForm form) {
  require_full_record(ens, "martingale_defect");
  const int m = ens.steps(), n = ens.particles, d = ens.dim;
  const bool jumps_on = kernel.has_jump() && levy.active();

  auto grid_index = [&](double t) {
    int best = 0;
    double err = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= m; ++k) {
      const double e = std::abs(ens.grid[k] - t);
      if (e < err) {
        err = e;
        best = k;
      }
    }
    return best;
  };

  std::vector<DefectEntry> table;
  std::vector<double> mpath(static_cast<size_t>(n) * (m + 1));

  for (const auto& f : fs) {
    // running discretized martingale per particle
    for (int p = 0; p < n; ++p) mpath[static_cast<size_t>(p) * (m + 1)] = 0.0;
    for (int k = 0; k < m; ++k) {
      const double h = ens.grid[k + 1] - ens.grid[k];
      const MeasureSummary law{ens.law_summary[k].mean, ens.law_summary[k].l2};
      for (int p = 0; p < n; ++p) {
        Vec xk(d), xk1(d);
        for (int a = 0; a < d; ++a) {
          xk[a] = ens.snapshots[k][static_cast<size_t>(p) * d + a];
          xk1[a] = ens.snapshots[k + 1][static_cast<size_t>(p) * d + a];
        }
        const Vec gf = f.gradient(xk);
        const Mat hf = f.hessian(xk);
        const Mat sig = kernel.diffusion_mf(xk, law);
        double gen = gf.dot(kernel.drift_mf(xk, law)) + 0.5 * (sig * sig.transpose() * hf).trace();
        if (jumps_on) {
          const double gain = kernel.jump_gain_mf(xk, law);
          const Mat& mm = kernel.jump_part()->mark_map;
          for (const auto& [z, w] : levy.integration_nodes()) {
            const Vec gz = gain * (mm * z);
            if (form == GeneratorForm::quadratic)
              gen += 0.5 * w * gz.dot(hf * gz);
            else
              gen += w * (f.value(xk + gz) - f.value(xk) - gf.dot(gz));
          }
        }
        // K-term: sum over substeps of <grad f(X_new), dK>
        double kterm = 0.0;
        const StepOverrideRecord* ov = ens.override_for(p, k);
        if (ov) {
          for (const auto& sub : ov->subs) kterm += f.gradient(sub.x_new).dot(sub.dk);
        } else {
          const size_t at = static_cast<size_t>(p) * m + k;
          const Vec gf1 = f.gradient(xk1);
          for (int a = 0; a < d; ++a) kterm += gf1[a] * ens.s3[at * d + a];
        }
        const size_t row = static_cast<size_t>(p) * (m + 1);
        mpath[row + k + 1] = mpath[row + k] + (f.value(xk1) - f.value(xk)) + kterm - gen * h;
      }
    }

    for (const auto& [s, t] : st_pairs) {
      const int ks = grid_index(s), kt = grid_index(t);
      for (const auto& gamma : gammas) {
        DefectEntry e;
        e.f_name = f.name();
        e.gamma_name = gamma.name;
        e.s = ens.grid[ks];
        e.t = ens.grid[kt];
        double sum = 0.0, sumsq = 0.0;
        for (int p = 0; p < n; ++p) {
          double g = 1.0;
          for (double tg : gamma.times) {
            const double t_abs = gamma.relative ? tg * e.s : std::min(tg, e.s);
            const int kg = grid_index(t_abs);
            const double coord = ens.snapshots[kg][static_cast<size_t>(p) * d];
            g *= std::clamp(coord, -1.0, 1.0);
          }
          const size_t row = static_cast<size_t>(p) * (m + 1);
          const double v = (mpath[row + kt] - mpath[row + ks]) * g;
          sum += v;
          sumsq += v * v;
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sumsq / n - mean * mean);
        e.defect = mean;
        e.se = std::sqrt(var / n);
        table.push_back(std::move(e));
      }
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Osgood majorants

double psi_value(PsiKind kind, double u) {
  if (u <= 0.0) return 0.0;
  switch (kind) {
    case PsiKind::linear:
      return u;
    case PsiKind::linear_plus_log:
      return u + modulus(ModulusKind::log_osgood, u);
  }
  throw std::logic_error("unreachable");
}

std::vector<double> osgood_majorant(PsiKind psi, double c, double y0, double t_end, int steps) {
  if (!(c >= 0.0) || !(y0 >= 0.0)) throw UsageError("osgood_majorant: C >= 0 and y0 >= 0");
  if (steps < 1) throw UsageError("osgood_majorant: steps >= 1");
  std::vector<double> y(steps + 1);
  y[0] = y0;
  const double h = t_end / steps;
  double cur = y0;
  for (int k = 0; k < steps; ++k) {
    const double k1 = c * psi_value(psi, cur);
    const double k2 = c * psi_value(psi, cur + 0.5 * h * k1);
    const double k3 = c * psi_value(psi, cur + 0.5 * h * k2);
    const double k4 = c * psi_value(psi, cur + h * k3);
    cur += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y[k + 1] = cur;
  }
  return y;
}

MajorantFit fit_osgood_majorant(const std::vector<double>& times, const std::vector<double>& curve,
                                PsiKind psi) {
  if (times.size() != curve.size() || times.size() < 2)
    throw UsageError("fit_osgood_majorant: grid/curve mismatch");
  MajorantFit fit;
  double peak = 0.0;
  for (double v : curve) peak = std::max(peak, v);
  const double floor = std::max(1e-12, 1e-6 * peak);
  fit.y0 = curve.front() + floor;

  double c = 0.0;
  for (size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    const double rise = curve[k + 1] - curve[k];
    if (rise <= 0.0) continue;
    c = std::max(c, rise / (dt * psi_value(psi, std::max(curve[k], floor))));
  }
  fit.c = c;

  // explicit Euler on the same grid dominates the curve by construction
  fit.majorant.resize(times.size());
  fit.majorant[0] = fit.y0;
  bool ok = curve[0] <= fit.y0;
  for (size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    fit.majorant[k + 1] = fit.majorant[k] + dt * c * psi_value(psi, fit.majorant[k]);
    ok = ok && curve[k + 1] <= fit.majorant[k + 1] * (1.0 + 1e-12) + 1e-300;
  }
  fit.dominates = ok;
  return fit;
}

}  // namespace mmv
