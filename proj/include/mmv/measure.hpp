#pragma once

#include <vector>

#include "mmv/types.hpp"

namespace mmv {

/// Weighted particle cloud standing in for a law L_{X_t}.
class EmpiricalMeasure {
public:
  explicit EmpiricalMeasure(std::vector<Vec> points);  // uniform weights
  EmpiricalMeasure(std::vector<Vec> points, std::vector<double> weights);

  static EmpiricalMeasure dirac(Vec point);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(points_.size()); }
  const Vec& point(int i) const { return points_[i]; }
  double weight(int i) const { return weights_[i]; }
  const std::vector<Vec>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  bool uniform() const { return uniform_; }

  Vec mean() const;

  /// ||mu||_2 = (sum_i w_i |x_i|^2)^{1/2}.
  double second_moment() const;

private:
  std::vector<Vec> points_;
  std::vector<double> weights_;
  int dim_;
  bool uniform_;
};

enum class W2Method { exact_1d, exact_assignment, entropic };

struct W2Options {
  int assignment_cap = 512;         // exact_assignment precondition
  double entropic_eps_start = 1.0;  // halved down to eps_final
  double entropic_eps_final = 1e-3;
  double entropic_marginal_tol = 1e-9;
  // Per-level iteration budget. At small eps the 1e-9 marginal target can need
  // millions of sweeps; the budget bounds the work and the final plan is
  // rounded onto the transport polytope either way, so the returned value is
  // a feasible primal cost with an honest duality gap.
  int entropic_max_iters = 2000;
};

struct W2Result {
  double distance = 0.0;
  double duality_gap = 0.0;  // 0 for exact methods; primal-dual bound for entropic
};

W2Result wasserstein2_detail(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                             W2Method method, const W2Options& opts = {});

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, W2Method method,
                    const W2Options& opts = {});

/// Default method policy: exact_1d in d=1; exact_assignment for equal uniform
/// clouds up to the cap; entropic otherwise.
double wasserstein2_auto(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                         const W2Options& opts = {});

/// W2 between two equally sized uniform 1-d clouds given as raw samples.
/// Sorts copies; the cheap path used by the Picard stopping rule.
double w2_exact_1d_uniform(std::vector<double> a, std::vector<double> b);

/// ((1/N) sum |x_i - y_i|^2)^{1/2} for paired samples: an upper bound for the
/// W2 distance of the two induced empirical measures.
double coupling_upper_bound(const std::vector<Vec>& xs, const std::vector<Vec>& ys);

/// Exact minimum-cost perfect matching value for a square cost matrix
/// (Jonker-Volgenant style shortest augmenting paths). Exposed for tests.
double assignment_min_cost(const std::vector<std::vector<double>>& cost);

}  // namespace mmv
