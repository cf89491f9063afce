#include "mmv/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mmv {

LevyConfig LevyConfig::none(int mark_dim) {
  LevyConfig c;
  c.kind_ = LevyKind::none;
  c.mark_dim_ = mark_dim;
  return c;
}

LevyConfig LevyConfig::discrete(std::vector<Vec> atoms, std::vector<double> masses,
                                double small_cutoff) {
  if (atoms.empty() || atoms.size() != masses.size())
    throw ConfigError("levy discrete: atoms/masses mismatch");
  LevyConfig c;
  c.kind_ = LevyKind::discrete;
  c.mark_dim_ = static_cast<int>(atoms.front().size());
  double total = 0.0;
  for (size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].size() != c.mark_dim_ || !atoms[i].allFinite())
      throw ConfigError("levy discrete: bad atom");
    if (!(masses[i] > 0.0)) throw ConfigError("levy discrete: masses must be > 0");
    total += masses[i];
    c.cum_.push_back(total);
  }
  c.atoms_ = std::move(atoms);
  c.masses_ = std::move(masses);
  c.total_mass_ = total;
  if (!(small_cutoff > 0.0)) throw ConfigError("levy: small_cutoff must be > 0");
  c.small_cutoff_ = small_cutoff;
  c.build_nodes();
  return c;
}

LevyConfig LevyConfig::uniform_annulus(int mark_dim, double r_min, double r_max, double mass,
                                       double small_cutoff) {
  if (mark_dim < 1 || mark_dim > kMaxDim) throw ConfigError("levy annulus: bad mark dimension");
  if (!(0.0 <= r_min && r_min < r_max)) throw ConfigError("levy annulus: need 0 <= r_min < r_max");
  if (!(mass > 0.0)) throw ConfigError("levy annulus: total mass must be > 0");
  LevyConfig c;
  c.kind_ = LevyKind::uniform_annulus;
  c.mark_dim_ = mark_dim;
  c.r_min_ = r_min;
  c.r_max_ = r_max;
  c.total_mass_ = mass;
  if (!(small_cutoff > 0.0)) throw ConfigError("levy: small_cutoff must be > 0");
  c.small_cutoff_ = small_cutoff;
  c.build_nodes();
  return c;
}

void LevyConfig::build_nodes() {
  nodes_.clear();
  mean_mark_ = Vec::Zero(mark_dim_);
  if (kind_ == LevyKind::discrete) {
    for (size_t i = 0; i < atoms_.size(); ++i) nodes_.emplace_back(atoms_[i], masses_[i]);
    for (const auto& [z, w] : nodes_) {
      mean_mark_ += w * z;
      second_moment_ += w * z.squaredNorm();
    }
    return;
  }
  // Annulus: radial x angular tensor rule. Uniform measure has density
  // mass / vol(annulus); in radial coordinates the weight is r^{m-1} dr dS.
  const int m = mark_dim_;
  const int nr = 200;
  const double pi = std::numbers::pi;
  std::vector<std::pair<Vec, double>> dirs;  // unit directions with surface weights summing to |S^{m-1}|
  if (m == 1) {
    Vec plus(1), minus(1);
    plus[0] = 1.0;
    minus[0] = -1.0;
    dirs = {{plus, 1.0}, {minus, 1.0}};
  } else if (m == 2) {
    const int na = 48;
    for (int k = 0; k < na; ++k) {
      const double a = 2.0 * pi * (k + 0.5) / na;
      Vec d(2);
      d[0] = std::cos(a);
      d[1] = std::sin(a);
      dirs.emplace_back(d, 2.0 * pi / na);
    }
  } else {
    // low-discrepancy direction set; adequate for desk-scale m >= 3
    const int na = 128;
    const double surface = 2.0 * std::pow(pi, m / 2.0) / std::tgamma(m / 2.0);
    CounterStream st(0x5eedULL, 0, 0, channel::sampler);
    for (int k = 0; k < na; ++k) {
      Vec d(m);
      for (int a = 0; a < m; ++a) d[a] = st.normal();
      dirs.emplace_back(d.normalized(), surface / na);
    }
  }
  // Gauss-Legendre radial nodes on [r_min, r_max] (simple fixed rule)
  // weights: density * r^{m-1}
  const double vol = (std::pow(r_max_, m) - std::pow(r_min_, m)) / m *
                     (2.0 * std::pow(pi, m / 2.0) / std::tgamma(m / 2.0));
  const double density = total_mass_ / vol;
  // composite midpoint in r (smooth integrand, 200 cells)
  for (int i = 0; i < nr; ++i) {
    const double r = r_min_ + (r_max_ - r_min_) * (i + 0.5) / nr;
    const double wr = (r_max_ - r_min_) / nr * std::pow(r, m - 1) * density;
    for (const auto& [d, wd] : dirs) nodes_.emplace_back(Vec(r * d), wr * wd);
  }
  for (const auto& [z, w] : nodes_) {
    mean_mark_ += w * z;
    second_moment_ += w * z.squaredNorm();
  }
}

Vec LevyConfig::small_mark_mean(double alpha) const {
  Vec acc = Vec::Zero(mark_dim_);
  for (const auto& [z, w] : nodes_)
    if (z.norm() <= alpha) acc += w * z;
  return acc;
}

Vec LevyConfig::sample_mark(CounterStream& st) const {
  if (kind_ == LevyKind::discrete) {
    const double u = st.u01() * total_mass_;
    const size_t idx = std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
    return atoms_[std::min(idx, atoms_.size() - 1)];
  }
  if (kind_ == LevyKind::uniform_annulus) {
    // radius from CDF (r^m - r_min^m)/(r_max^m - r_min^m), direction uniform
    const int m = mark_dim_;
    const double u = st.u01();
    const double rm = std::pow(r_min_, m) + u * (std::pow(r_max_, m) - std::pow(r_min_, m));
    const double r = std::pow(rm, 1.0 / m);
    Vec d(m);
    if (m == 1) {
      d[0] = st.u01() < 0.5 ? -1.0 : 1.0;
    } else {
      for (int a = 0; a < m; ++a) d[a] = st.normal();
      const double len = d.norm();
      d = len > 0 ? Vec(d / len) : Vec(Vec::Unit(m, 0));
    }
    return r * d;
  }
  throw UsageError("sample_mark: no levy measure configured");
}

std::vector<JumpEventDraw> sample_jumps(const LevyConfig& levy, uint64_t seed, uint32_t particle) {
  std::vector<JumpEventDraw> out;
  if (!levy.active()) return out;
  CounterStream count_st(seed, particle, 0, channel::jump_count);
  const int k = count_st.poisson(levy.total_mass());
  if (k == 0) return out;
  out.reserve(k);
  CounterStream time_st(seed, particle, 0, channel::jump_time);
  CounterStream mark_st(seed, particle, 0, channel::jump_mark);
  for (int j = 0; j < k; ++j) {
    JumpEventDraw e;
    e.time = time_st.u01();  // (0,1)
    e.mark = levy.sample_mark(mark_st);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(),
            [](const JumpEventDraw& a, const JumpEventDraw& b) { return a.time < b.time; });
  return out;
}

Vec brownian_increment(uint64_t seed, uint32_t particle, uint32_t step, int dim, double h) {
  CounterStream st(seed, particle, step, channel::brownian);
  Vec dw(dim);
  const double s = std::sqrt(h);
  for (int a = 0; a < dim; ++a) dw[a] = s * st.normal();
  return dw;
}

double bridge_normal(uint64_t seed, uint32_t particle, uint32_t step, uint32_t index) {
  CounterStream st(seed, particle, step, channel::bridge);
  double z = 0.0;
  for (uint32_t i = 0; i <= index; ++i) z = st.normal();
  return z;
}

NoiseEnsemble sample_noise(const LevyConfig& levy, const std::vector<double>& grid, int dim,
                           int particles, uint64_t seed) {
  if (grid.size() < 2) throw UsageError("sample_noise: grid needs at least two points");
  for (size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw UsageError("sample_noise: grid must be strictly increasing");
  if (particles < 1) throw UsageError("sample_noise: particles >= 1");
  NoiseEnsemble ens;
  ens.grid = grid;
  ens.dim = dim;
  ens.paths.resize(particles);
  const int steps = static_cast<int>(grid.size()) - 1;
  for (int p = 0; p < particles; ++p) {
    auto& path = ens.paths[p];
    path.brownian.resize(static_cast<size_t>(steps) * dim);
    for (int k = 0; k < steps; ++k) {
      const double h = grid[k + 1] - grid[k];
      const Vec dw = brownian_increment(seed, p, k, dim, h);
      for (int a = 0; a < dim; ++a) path.brownian[static_cast<size_t>(k) * dim + a] = dw[a];
    }
    path.jumps = sample_jumps(levy, seed, p);
  }
  return ens;
}

Vec compensator_drift(const CoefficientKernel& kernel, const Vec& x, const MeasureSummary& mu,
                      const LevyConfig& levy) {
  if (!kernel.has_jump() || !levy.active()) return Vec::Zero(kernel.dim());
  // G[x,mu,z] = gain(x,mu) * (M z), so the nu-integral reduces to the mark mean.
  return kernel.jump_mf(x, mu, levy.mean_mark());
}

}  // namespace mmv
