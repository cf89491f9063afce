#include "mmv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmv {

EmpiricalMeasure::EmpiricalMeasure(std::vector<Vec> points)
    : EmpiricalMeasure(std::move(points), {}) {}

EmpiricalMeasure::EmpiricalMeasure(std::vector<Vec> points, std::vector<double> weights) {
  if (points.empty()) throw UsageError("EmpiricalMeasure: needs at least one point");
  dim_ = static_cast<int>(points.front().size());
  for (const auto& p : points) {
    if (p.size() != dim_) throw UsageError("EmpiricalMeasure: mixed dimensions");
    require_finite(p, "EmpiricalMeasure point");
  }
  points_ = std::move(points);
  if (weights.empty()) {
    uniform_ = true;
    weights_.assign(points_.size(), 1.0 / static_cast<double>(points_.size()));
  } else {
    if (weights.size() != points_.size())
      throw UsageError("EmpiricalMeasure: weights/points length mismatch");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw UsageError("EmpiricalMeasure: bad weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw UsageError("EmpiricalMeasure: weights must sum to 1");
    weights_ = std::move(weights);
    uniform_ = false;
  }
}

EmpiricalMeasure EmpiricalMeasure::dirac(Vec point) {
  std::vector<Vec> pts;
  pts.push_back(std::move(point));
  return EmpiricalMeasure(std::move(pts));
}

Vec EmpiricalMeasure::mean() const {
  Vec m = Vec::Zero(dim_);
  for (size_t i = 0; i < points_.size(); ++i) m += weights_[i] * points_[i];
  return m;
}

double EmpiricalMeasure::second_moment() const {
  double s = 0.0;
  for (size_t i = 0; i < points_.size(); ++i) s += weights_[i] * points_[i].squaredNorm();
  return std::sqrt(s);
}

double w2_exact_1d_uniform(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw UsageError("w2_exact_1d_uniform: size mismatch");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

namespace {

// Exact 1-d W2 for weighted clouds via the quantile coupling.
double w2_1d_weighted(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  auto sorted_idx = [](const EmpiricalMeasure& m) {
    std::vector<int> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return m.point(a)[0] < m.point(b)[0]; });
    return idx;
  };
  const auto ia = sorted_idx(mu), ib = sorted_idx(nu);
  size_t i = 0, j = 0;
  double wa = mu.weight(ia[0]), wb = nu.weight(ib[0]);
  double cost = 0.0;
  while (i < ia.size() && j < ib.size()) {
    const double m = std::min(wa, wb);
    const double d = mu.point(ia[i])[0] - nu.point(ib[j])[0];
    cost += m * d * d;
    wa -= m;
    wb -= m;
    if (wa <= 1e-15) {
      ++i;
      if (i < ia.size()) wa = mu.weight(ia[i]);
    }
    if (wb <= 1e-15) {
      ++j;
      if (j < ib.size()) wb = nu.weight(ib[j]);
    }
  }
  return std::sqrt(std::max(cost, 0.0));
}

std::vector<std::vector<double>> cost_matrix(const EmpiricalMeasure& mu,
                                             const EmpiricalMeasure& nu) {
  std::vector<std::vector<double>> c(mu.size(), std::vector<double>(nu.size()));
  for (int i = 0; i < mu.size(); ++i)
    for (int j = 0; j < nu.size(); ++j) c[i][j] = (mu.point(i) - nu.point(j)).squaredNorm();
  return c;
}

// Log-domain Sinkhorn with halving epsilon schedule, plan rounding for a
// feasible primal value and a c-transform dual lower bound.
W2Result sinkhorn_entropic(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const W2Options& opts) {
  const int n = mu.size(), m = nu.size();
  const auto c = cost_matrix(mu, nu);
  std::vector<double> logw_a(n), logw_b(m);
  for (int i = 0; i < n; ++i) logw_a[i] = std::log(std::max(mu.weight(i), 1e-300));
  for (int j = 0; j < m; ++j) logw_b[j] = std::log(std::max(nu.weight(j), 1e-300));

  std::vector<double> f(n, 0.0), g(m, 0.0);
  auto lse_col = [&](int j, double eps) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) mx = std::max(mx, (f[i] - c[i][j]) / eps + logw_a[i]);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp((f[i] - c[i][j]) / eps + logw_a[i] - mx);
    return mx + std::log(s);
  };
  auto lse_row = [&](int i, double eps) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) mx = std::max(mx, (g[j] - c[i][j]) / eps + logw_b[j]);
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += std::exp((g[j] - c[i][j]) / eps + logw_b[j] - mx);
    return mx + std::log(s);
  };

  double eps = opts.entropic_eps_start;
  std::vector<double> colsum(m);
  while (true) {
    for (int it = 0; it < opts.entropic_max_iters; ++it) {
      for (int j = 0; j < m; ++j) g[j] = -eps * lse_col(j, eps);
      // the f update exposes the row-marginal violation of the current plan:
      // row_i sum = w_i * exp((f_i - f_i_new)/eps)
      double viol = 0.0;
      for (int i = 0; i < n; ++i) {
        const double fnew = -eps * lse_row(i, eps);
        viol += mu.weight(i) * std::abs(std::expm1((f[i] - fnew) / eps));
        f[i] = fnew;
      }
      if (viol < opts.entropic_marginal_tol) break;
    }
    if (eps <= opts.entropic_eps_final * (1.0 + 1e-12)) break;
    eps = std::max(0.5 * eps, opts.entropic_eps_final);
  }

  // Plan, rounded onto the transport polytope (scale rows, then columns, then
  // distribute any residual mass on the outer product of the deficiencies).
  std::vector<std::vector<double>> p(n, std::vector<double>(m));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      p[i][j] = std::exp((f[i] + g[j] - c[i][j]) / eps + logw_a[i] + logw_b[j]);
  for (int i = 0; i < n; ++i) {
    double rs = 0.0;
    for (int j = 0; j < m; ++j) rs += p[i][j];
    const double scale = rs > 0 ? std::min(1.0, mu.weight(i) / rs) : 0.0;
    for (int j = 0; j < m; ++j) p[i][j] *= scale;
  }
  for (int j = 0; j < m; ++j) {
    colsum[j] = 0.0;
    for (int i = 0; i < n; ++i) colsum[j] += p[i][j];
    const double scale = colsum[j] > 0 ? std::min(1.0, nu.weight(j) / colsum[j]) : 0.0;
    for (int i = 0; i < n; ++i) p[i][j] *= scale;
  }
  std::vector<double> row_def(n), col_def(m);
  double total_def = 0.0;
  for (int i = 0; i < n; ++i) {
    double rs = 0.0;
    for (int j = 0; j < m; ++j) rs += p[i][j];
    row_def[i] = mu.weight(i) - rs;
    total_def += row_def[i];
  }
  for (int j = 0; j < m; ++j) {
    double cs = 0.0;
    for (int i = 0; i < n; ++i) cs += p[i][j];
    col_def[j] = nu.weight(j) - cs;
  }
  if (total_def > 1e-300) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) p[i][j] += row_def[i] * col_def[j] / total_def;
  }
  double primal = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) primal += p[i][j] * c[i][j];

  // Dual feasible pair via one c-transform of g.
  double dual = 0.0;
  for (int j = 0; j < m; ++j) dual += nu.weight(j) * g[j];
  for (int i = 0; i < n; ++i) {
    double fi = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) fi = std::min(fi, c[i][j] - g[j]);
    dual += mu.weight(i) * fi;
  }

  W2Result r;
  r.distance = std::sqrt(std::max(primal, 0.0));
  const double dual_dist = std::sqrt(std::max(dual, 0.0));
  r.duality_gap = std::max(r.distance - dual_dist, 0.0);
  return r;
}

}  // namespace

double assignment_min_cost(const std::vector<std::vector<double>>& cost) {
  // Jonker-Volgenant style shortest augmenting path, O(n^3).
  const int n = static_cast<int>(cost.size());
  if (n == 0) return 0.0;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match_col(n + 1, 0);  // col -> row (1-based, 0 = free)
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match_col[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    if (match_col[j]) total += cost[match_col[j] - 1][j - 1];
  return total;
}

W2Result wasserstein2_detail(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                             W2Method method, const W2Options& opts) {
  if (mu.dim() != nu.dim()) throw UsageError("wasserstein2: dimension mismatch");
  switch (method) {
    case W2Method::exact_1d: {
      if (mu.dim() != 1) throw UsageError("wasserstein2: exact_1d requires d=1");
      return {w2_1d_weighted(mu, nu), 0.0};
    }
    case W2Method::exact_assignment: {
      if (!mu.uniform() || !nu.uniform() || mu.size() != nu.size())
        throw UsageError("wasserstein2: exact_assignment requires equal uniform clouds");
      if (mu.size() > opts.assignment_cap)
        throw UsageError("wasserstein2: exact_assignment exceeds configured cap");
      const double total = assignment_min_cost(cost_matrix(mu, nu));
      return {std::sqrt(std::max(total / mu.size(), 0.0)), 0.0};
    }
    case W2Method::entropic:
      return sinkhorn_entropic(mu, nu, opts);
  }
  throw std::logic_error("unreachable");
}

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, W2Method method,
                    const W2Options& opts) {
  return wasserstein2_detail(mu, nu, method, opts).distance;
}

double wasserstein2_auto(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                         const W2Options& opts) {
  if (mu.dim() == 1) return wasserstein2(mu, nu, W2Method::exact_1d, opts);
  if (mu.uniform() && nu.uniform() && mu.size() == nu.size() && mu.size() <= opts.assignment_cap)
    return wasserstein2(mu, nu, W2Method::exact_assignment, opts);
  return wasserstein2(mu, nu, W2Method::entropic, opts);
}

double coupling_upper_bound(const std::vector<Vec>& xs, const std::vector<Vec>& ys) {
  if (xs.size() != ys.size() || xs.empty())
    throw UsageError("coupling_upper_bound: paired samples required");
  double s = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) s += (xs[i] - ys[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace mmv
