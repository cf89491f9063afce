#include "mmv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>
#include <thread>

#include "mmv/measure.hpp"

namespace mmv {

namespace {

constexpr double kDomainTol = 1e-9;

void parallel_for(int n, int workers, const std::function<void(int, int)>& range_fn) {
  if (workers <= 1 || n < 2 * workers) {
    range_fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(range_fn, lo, hi);
  }
  for (auto& t : pool) t.join();
}

MeasureSummary summary_of(const std::vector<double>& states, int n, int d) {
  MeasureSummary s;
  s.mean = Vec::Zero(d);
  double sq = 0.0;
  for (int p = 0; p < n; ++p) {
    for (int a = 0; a < d; ++a) {
      const double v = states[static_cast<size_t>(p) * d + a];
      s.mean[a] += v;
      sq += v * v;
    }
  }
  s.mean /= n;
  s.l2 = std::sqrt(sq / n);
  return s;
}

std::vector<double> base_grid(double h) {
  if (!(h > 0.0) || h > 1.0) throw ConfigError("scheme: step h must be in (0, 1]");
  const int m = std::max(1, static_cast<int>(std::lround(1.0 / h)));
  std::vector<double> grid(m + 1);
  for (int k = 0; k <= m; ++k) grid[k] = static_cast<double>(k) / m;
  return grid;
}

}  // namespace

int SolutionEnsemble::snapshot_index(int step) const {
  const auto it = std::lower_bound(snapshot_steps.begin(), snapshot_steps.end(), step);
  if (it == snapshot_steps.end() || *it != step) return -1;
  return static_cast<int>(it - snapshot_steps.begin());
}

Vec SolutionEnsemble::state(int snapshot_idx, int particle) const {
  Vec out(dim);
  const double* src = &snapshots[snapshot_idx][static_cast<size_t>(particle) * dim];
  for (int a = 0; a < dim; ++a) out[a] = src[a];
  return out;
}

EmpiricalMeasure SolutionEnsemble::measure_at(int snapshot_idx) const {
  std::vector<Vec> pts;
  pts.reserve(particles);
  for (int p = 0; p < particles; ++p) pts.push_back(state(snapshot_idx, p));
  return EmpiricalMeasure(std::move(pts));
}

const StepOverrideRecord* SolutionEnsemble::override_for(int particle, int step) const {
  // overrides are sorted by (particle, step)
  auto it = std::lower_bound(overrides.begin(), overrides.end(), std::make_pair(particle, step),
                             [](const StepOverrideRecord& r, const std::pair<int, int>& key) {
                               return std::make_pair(r.particle, r.step) < key;
                             });
  if (it == overrides.end() || it->particle != particle || it->step != step) return nullptr;
  return &*it;
}

double SolutionEnsemble::moment_statistic() const {
  double acc = 0.0;
  for (int p = 0; p < particles; ++p) acc += sup_sq[p] + k_tv[p];
  return acc / particles;
}

std::vector<double> sample_initial_states(const SchemeConfig& scheme, const MonotoneOperator& op,
                                          int dim, uint64_t seed, int* projected_count) {
  const int n = scheme.particles;
  std::vector<double> states(static_cast<size_t>(n) * dim);
  int projected = 0;
  for (int p = 0; p < n; ++p) {
    CounterStream st(seed, static_cast<uint32_t>(p), 0, channel::initial);
    Vec x(dim);
    switch (scheme.initial.kind) {
      case InitialLaw::Kind::point:
        x = scheme.initial.point;
        break;
      case InitialLaw::Kind::uniform_box:
        for (int a = 0; a < dim; ++a)
          x[a] = scheme.initial.lower[a] +
                 (scheme.initial.upper[a] - scheme.initial.lower[a]) * st.u01();
        break;
      case InitialLaw::Kind::gaussian:
        for (int a = 0; a < dim; ++a) x[a] = scheme.initial.mean[a] + scheme.initial.stddev * st.normal();
        break;
    }
    if (!op.domain().is_whole_space() && op.domain().distance(x) > kDomainTol) {
      x = op.domain().project(x);
      ++projected;
    }
    for (int a = 0; a < dim; ++a) states[static_cast<size_t>(p) * dim + a] = x[a];
  }
  if (projected_count) *projected_count = projected;
  return states;
}

SolutionEnsemble simulate(const CoefficientKernel& kernel, const MonotoneOperator& op,
                          const LevyConfig& levy, const SchemeConfig& scheme, uint64_t seed,
                          const LawFlow* frozen, const NoiseEnsemble* replay) {
  const int d = kernel.dim();
  if (op.dim() != d) throw ConfigError("simulate: operator/kernel dimension mismatch");
  if (scheme.particles < 1) throw ConfigError("simulate: particles must be >= 1");
  if (kernel.has_jump() && levy.active() && levy.mark_dim() != kernel.mark_dim())
    throw ConfigError("simulate: mark dimension mismatch");
  if (kernel.has_jump() && !levy.active())
    throw ConfigError("simulate: kernel has a jump map but the Levy measure has zero mass");
  if (scheme.law_mode == LawMode::frozen && frozen == nullptr)
    throw UsageError("simulate: frozen law mode needs a law flow");

  SolutionEnsemble ens;
  ens.dim = d;
  ens.particles = scheme.particles;
  ens.grid = base_grid(scheme.h);
  ens.seed = seed;
  const int n = scheme.particles;
  const int m = ens.steps();

  if (frozen && static_cast<int>(frozen->summaries.size()) != m + 1)
    throw UsageError("simulate: frozen law flow does not match the grid");
  if (replay) {
    if (replay->grid.size() != ens.grid.size() || replay->dim != d ||
        static_cast<int>(replay->paths.size()) < n)
      throw UsageError("simulate: replay noise does not match the scheme");
  }

  // snapshots at step 0, every stride, and the final step
  const int stride = std::max(1, scheme.snapshot_stride);
  for (int k = 0; k <= m; ++k)
    if (k == 0 || k == m || k % stride == 0) ens.snapshot_steps.push_back(k);
  ens.snapshots.assign(ens.snapshot_steps.size(), std::vector<double>(static_cast<size_t>(n) * d));

  ens.has_step_stats = scheme.record_step_stats;
  if (ens.has_step_stats) {
    ens.s1.assign(static_cast<size_t>(n) * m, 0.0);
    ens.s5.assign(static_cast<size_t>(n) * m, 0.0);
    ens.s3.assign(static_cast<size_t>(n) * m * d, 0.0);
  }
  ens.sup_sq.assign(n, 0.0);
  ens.k_tv.assign(n, 0.0);

  std::vector<double> states =
      sample_initial_states(scheme, op, d, seed, &ens.projected_initial_count);

  // per-particle jump schedules (grid-independent)
  std::vector<std::vector<JumpEventDraw>> jumps(n);
  const bool jumps_on = kernel.has_jump() && levy.active();
  if (jumps_on) {
    if (replay)
      for (int p = 0; p < n; ++p) jumps[p] = replay->paths[p].jumps;
    else
      for (int p = 0; p < n; ++p) jumps[p] = sample_jumps(levy, seed, p);
  }
  std::vector<size_t> cursor(n, 0);

  std::vector<double> max_dist(n, 0.0), jump_dk(n, 0.0);
  std::vector<std::vector<JumpEventRecord>> jump_scratch(n);
  std::vector<std::vector<StepOverrideRecord>> override_scratch(n);

  for (int p = 0; p < n; ++p) {
    ConstVecMap x0(&states[static_cast<size_t>(p) * d], d);
    ens.sup_sq[p] = x0.squaredNorm();
  }

  const bool cone = op.kind() == OperatorKind::normal_cone || op.kind() == OperatorKind::sum;

  auto record_snapshot = [&](int k) {
    const int idx = ens.snapshot_index(k);
    if (idx >= 0) std::memcpy(ens.snapshots[idx].data(), states.data(), states.size() * sizeof(double));
  };
  record_snapshot(0);

  for (int k = 0; k < m; ++k) {
    const double t0 = ens.grid[k], t1 = ens.grid[k + 1];
    const double hstep = t1 - t0;
    const MeasureSummary law =
        scheme.law_mode == LawMode::frozen ? frozen->summaries[k] : summary_of(states, n, d);
    ens.law_summary.push_back({t0, law.mean, law.l2});

    auto worker = [&](int lo, int hi) {
      Vec x(d), y(d), xn(d), dk(d), dw(d), comp(d);
      for (int p = lo; p < hi; ++p) {
        for (int a = 0; a < d; ++a) x[a] = states[static_cast<size_t>(p) * d + a];

        const Vec drift = kernel.drift_mf(x, law);
        const Mat sig = kernel.diffusion_mf(x, law);
        comp = jumps_on ? compensator_drift(kernel, x, law, levy) : Vec(Vec::Zero(d));

        if (replay) {
          const double* src = &replay->paths[p].brownian[static_cast<size_t>(k) * d];
          for (int a = 0; a < d; ++a) dw[a] = src[a];
        } else {
          dw = brownian_increment(seed, p, k, d, hstep);
        }

        // substeps at this particle's jump times inside (t0, t1]
        const auto& js = jumps[p];
        size_t j0 = cursor[p];
        while (j0 < js.size() && js[j0].time <= t0) ++j0;
        size_t j1 = j0;
        while (j1 < js.size() && js[j1].time <= t1) ++j1;
        cursor[p] = j1;

        const bool has_sub = j1 > j0;
        StepOverrideRecord ov;
        if (has_sub) {
          ov.particle = p;
          ov.step = k;
        }

        double s1 = 0.0, s5 = 0.0;
        Vec s3 = Vec::Zero(d);
        Vec rem = dw;
        double hrem = hstep;
        double tprev = t0;
        uint32_t bridge_idx = 0;

        for (size_t j = j0; j <= j1; ++j) {
          const double tend = j < j1 ? js[j].time : t1;
          const double hs = tend - tprev;
          if (hs > 0.0) {
            Vec dws(d);
            if (j < j1) {
              // Brownian bridge split of the remaining increment
              const double var = hs * (hrem - hs) / hrem;
              const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
              for (int a = 0; a < d; ++a) {
                const double z = bridge_normal(seed, p, k, bridge_idx++);
                dws[a] = rem[a] * (hs / hrem) + sd * z;
              }
              rem -= dws;
              hrem -= hs;
            } else {
              dws = rem;
            }
            y = x + drift * hs + sig * dws - comp * hs;
            xn = op.resolvent(hs, y);
            dk = y - xn;
            const double dkn = dk.norm();
            s1 += xn.dot(dk);
            s3 += dk;
            s5 += dkn;
            ens.k_tv[p] += dkn;
            ens.sup_sq[p] = std::max(ens.sup_sq[p], xn.squaredNorm());
            if (cone) max_dist[p] = std::max(max_dist[p], op.domain().distance(xn));
            if (has_sub) ov.subs.push_back({xn, dk, hs});
            x = xn;
          }
          if (j < j1) {
            // apply the jump at its exact time; (H4) keeps the post-jump point feasible
            JumpEventRecord ev;
            ev.particle = p;
            ev.step = k;
            ev.time = js[j].time;
            ev.mark = js[j].mark;
            ev.pre_x = x;
            Vec xj = x + kernel.jump_mf(x, law, js[j].mark);
            ev.post_distance = cone ? op.domain().distance(xj) : 0.0;
            if (ev.post_distance > kDomainTol) {
              if (scheme.enforce_h4) {
                std::ostringstream os;
                os << "(H4) violation: x + G(x,y,z) leaves the closed domain at x = [";
                for (int a = 0; a < d; ++a) os << (a ? ", " : "") << x[a];
                os << "], z = [";
                for (int a = 0; a < js[j].mark.size(); ++a) os << (a ? ", " : "") << js[j].mark[a];
                os << "] (distance " << ev.post_distance << ")";
                throw ScenarioError(os.str());
              }
              Vec proj = op.domain().project(xj);
              dk = xj - proj;
              const double dkn = dk.norm();
              ev.dk_norm = dkn;
              jump_dk[p] = std::max(jump_dk[p], dkn);
              s1 += proj.dot(dk);
              s3 += dk;
              s5 += dkn;
              ens.k_tv[p] += dkn;
              if (has_sub) ov.subs.push_back({proj, dk, 0.0});
              xj = proj;
            }
            ev.post_x = xj;
            ens.sup_sq[p] = std::max(ens.sup_sq[p], xj.squaredNorm());
            jump_scratch[p].push_back(std::move(ev));
            x = xj;
          }
          tprev = tend;
        }

        if (ens.has_step_stats) {
          const size_t at = static_cast<size_t>(p) * m + k;
          ens.s1[at] = s1;
          ens.s5[at] = s5;
          for (int a = 0; a < d; ++a) ens.s3[at * d + a] = s3[a];
        }
        if (has_sub) override_scratch[p].push_back(std::move(ov));
        for (int a = 0; a < d; ++a) states[static_cast<size_t>(p) * d + a] = x[a];
      }
    };
    parallel_for(n, scheme.workers, worker);
    record_snapshot(k + 1);
  }

  const MeasureSummary final_law = scheme.law_mode == LawMode::frozen
                                       ? frozen->summaries[m]
                                       : summary_of(states, n, d);
  ens.law_summary.push_back({ens.grid[m], final_law.mean, final_law.l2});

  for (int p = 0; p < n; ++p) {
    ens.max_domain_distance = std::max(ens.max_domain_distance, max_dist[p]);
    ens.max_jump_dk = std::max(ens.max_jump_dk, jump_dk[p]);
    for (auto& ev : jump_scratch[p]) ens.jump_events.push_back(std::move(ev));
    for (auto& ov : override_scratch[p]) ens.overrides.push_back(std::move(ov));
  }
  if (ens.max_domain_distance > 10 * kDomainTol)
    throw std::logic_error("simulate: state escaped the domain beyond tolerance (scheme bug)");
  return ens;
}

namespace {

LawFlow flow_from_ensemble(const SolutionEnsemble& ens) {
  LawFlow flow;
  flow.dim = ens.dim;
  flow.particles = ens.particles;
  flow.clouds = ens.snapshots;  // stride 1 enforced by the caller
  flow.summaries.reserve(flow.clouds.size());
  for (const auto& cloud : flow.clouds)
    flow.summaries.push_back(summary_of(cloud, ens.particles, ens.dim));
  return flow;
}

std::vector<double> flow_gap_per_time(const LawFlow& a, const LawFlow& b, const W2Options& opts) {
  std::vector<double> out(a.clouds.size());
  const int d = a.dim;
  for (size_t t = 0; t < a.clouds.size(); ++t) {
    if (d == 1) {
      out[t] = w2_exact_1d_uniform(a.clouds[t], b.clouds[t]);
    } else {
      std::vector<Vec> pa, pb;
      const int n = a.particles;
      pa.reserve(n);
      pb.reserve(n);
      for (int p = 0; p < n; ++p) {
        Vec va(d), vb(d);
        for (int i = 0; i < d; ++i) {
          va[i] = a.clouds[t][static_cast<size_t>(p) * d + i];
          vb[i] = b.clouds[t][static_cast<size_t>(p) * d + i];
        }
        pa.push_back(va);
        pb.push_back(vb);
      }
      out[t] =
          wasserstein2_auto(EmpiricalMeasure(std::move(pa)), EmpiricalMeasure(std::move(pb)), opts);
    }
  }
  return out;
}

}  // namespace

PicardResult picard_solve(const CoefficientKernel& kernel, const MonotoneOperator& op,
                          const LevyConfig& levy, const SchemeConfig& scheme,
                          const PicardOptions& opts, uint64_t seed) {
  if (opts.max_iters < 1) throw ConfigError("picard: max_iters >= 1");
  SchemeConfig cfg = scheme;
  cfg.law_mode = LawMode::frozen;
  cfg.snapshot_stride = 1;  // the law flow needs every base time

  const int d = kernel.dim();
  const auto grid = base_grid(cfg.h);

  // flow^0: the law of X_0 at every time
  LawFlow flow;
  flow.dim = d;
  flow.particles = cfg.particles;
  std::vector<double> x0 = sample_initial_states(cfg, op, d, seed);
  flow.clouds.assign(grid.size(), x0);
  flow.summaries.assign(grid.size(), summary_of(x0, cfg.particles, d));

  PicardResult res;
  for (int it = 1; it <= opts.max_iters; ++it) {
    SolutionEnsemble ens = simulate(kernel, op, levy, cfg, seed, &flow);
    LawFlow next = flow_from_ensemble(ens);
    const std::vector<double> per_time = flow_gap_per_time(next, flow, W2Options{});
    const double gap = *std::max_element(per_time.begin(), per_time.end());
    res.gaps.push_back(gap);
    res.last_gap_per_time = per_time;
    flow = std::move(next);
    res.iterations = it;
    if (gap < opts.w2_tol) {
      res.converged = true;
      res.ensemble = std::move(ens);
      break;
    }
    if (it == opts.max_iters) res.ensemble = std::move(ens);
  }
  return res;
}

CascadeResult mollified_cascade(const CoefficientKernel& kernel, const MonotoneOperator& op,
                                const LevyConfig& levy, const SchemeConfig& scheme,
                                const std::vector<int>& levels, uint64_t seed, Quadrature quad,
                                double lattice_halfwidth) {
  if (levels.size() < 2) throw ConfigError("cascade: need at least two levels");
  for (size_t i = 1; i < levels.size(); ++i)
    if (levels[i] <= levels[i - 1]) throw ConfigError("cascade: levels must be strictly increasing");

  SchemeConfig cfg = scheme;
  cfg.snapshot_stride = 1;
  cfg.record_step_stats = false;

  CascadeResult res;
  res.levels = levels;
  std::vector<SolutionEnsemble> runs;
  runs.reserve(levels.size());
  for (int n : levels) {
    const MollifierConfig mc(n, kernel.dim(), quad);
    const CoefficientKernel kn = mollify(kernel, mc, lattice_halfwidth);
    runs.push_back(simulate(kn, op, levy, cfg, seed));
  }
  res.grid = runs.front().grid;
  const int nt = static_cast<int>(res.grid.size());
  const int np = cfg.particles, d = kernel.dim();
  for (size_t i = 0; i + 1 < runs.size(); ++i) {
    std::vector<double> curve(nt, 0.0);
    double emax = 0.0;
    for (int t = 0; t < nt; ++t) {
      double acc = 0.0;
      const auto& a = runs[i].snapshots[t];
      const auto& b = runs[i + 1].snapshots[t];
      for (size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        acc += diff * diff;
      }
      acc /= np;
      (void)d;
      curve[t] = acc;
      emax = std::max(emax, acc);
    }
    res.curves.push_back(std::move(curve));
    res.e.push_back(emax);
  }
  return res;
}

CoupledResult coupled_run(const CoefficientKernel& kernel, const MonotoneOperator& op,
                          const LevyConfig& levy, SchemeConfig scheme, const Vec& x0_a,
                          const Vec& x0_b, uint64_t seed) {
  scheme.snapshot_stride = 1;
  scheme.record_step_stats = false;
  SchemeConfig ca = scheme, cb = scheme;
  ca.initial = InitialLaw{InitialLaw::Kind::point, x0_a, {}, {}, {}, 1.0};
  cb.initial = InitialLaw{InitialLaw::Kind::point, x0_b, {}, {}, {}, 1.0};
  const SolutionEnsemble ea = simulate(kernel, op, levy, ca, seed);
  const SolutionEnsemble eb = simulate(kernel, op, levy, cb, seed);

  CoupledResult res;
  res.grid = ea.grid;
  res.g.resize(ea.grid.size());
  res.identical = true;
  for (size_t t = 0; t < ea.snapshots.size(); ++t) {
    double acc = 0.0;
    for (size_t j = 0; j < ea.snapshots[t].size(); ++j) {
      const double diff = ea.snapshots[t][j] - eb.snapshots[t][j];
      acc += diff * diff;
      if (std::memcmp(&ea.snapshots[t][j], &eb.snapshots[t][j], sizeof(double)) != 0)
        res.identical = false;
    }
    res.g[t] = acc / ea.particles;
  }
  return res;
}

}  // namespace mmv
