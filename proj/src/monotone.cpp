#include "mmv/monotone.hpp"

#include <algorithm>
#include <cmath>

#include "mmv/rng.hpp"

namespace mmv {

namespace {

constexpr double kDykstraTol = 1e-12;
constexpr int kDykstraCap = 10000;

Vec clamp_box(const Vec& p, const Vec& lo, const Vec& hi) {
  Vec out = p;
  for (int i = 0; i < p.size(); ++i) out[i] = std::min(std::max(p[i], lo[i]), hi[i]);
  return out;
}

}  // namespace

ConvexDomain ConvexDomain::whole_space(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("domain dimension out of range");
  ConvexDomain d;
  d.kind_ = DomainKind::whole_space;
  d.dim_ = dim;
  d.witness_ = Vec::Zero(dim);
  return d;
}

ConvexDomain ConvexDomain::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size() || lower.size() < 1 || lower.size() > kMaxDim)
    throw ConfigError("box: bound dimensions invalid");
  for (int i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || !(lower[i] < upper[i]))
      throw ConfigError("box: requires lower < upper componentwise");
  }
  ConvexDomain d;
  d.kind_ = DomainKind::box;
  d.dim_ = static_cast<int>(lower.size());
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  Vec w(d.dim_);
  for (int i = 0; i < d.dim_; ++i) {
    const double lo = d.lower_[i], hi = d.upper_[i];
    if (std::isfinite(lo) && std::isfinite(hi)) w[i] = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) w[i] = lo + 1.0;
    else if (std::isfinite(hi)) w[i] = hi - 1.0;
    else w[i] = 0.0;
  }
  d.witness_ = std::move(w);
  return d;
}

ConvexDomain ConvexDomain::ball(Vec center, double radius) {
  if (center.size() < 1 || center.size() > kMaxDim) throw ConfigError("ball: dimension invalid");
  if (!center.allFinite()) throw ConfigError("ball: non-finite center");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("ball: requires radius > 0");
  ConvexDomain d;
  d.kind_ = DomainKind::ball;
  d.dim_ = static_cast<int>(center.size());
  d.center_ = std::move(center);
  d.radius_ = radius;
  d.witness_ = d.center_;
  return d;
}

ConvexDomain ConvexDomain::halfspace_intersection(std::vector<Vec> normals,
                                                  std::vector<double> offsets,
                                                  Vec interior_witness) {
  if (normals.empty() || normals.size() != offsets.size())
    throw ConfigError("halfspace_intersection: normals/offsets mismatch");
  const int dim = static_cast<int>(normals.front().size());
  if (dim < 1 || dim > kMaxDim) throw ConfigError("halfspace_intersection: dimension invalid");
  for (size_t i = 0; i < normals.size(); ++i) {
    Vec& n = normals[i];
    if (n.size() != dim || !n.allFinite()) throw ConfigError("halfspace_intersection: bad normal");
    const double len = n.norm();
    if (len < 1e-14) throw ConfigError("halfspace_intersection: zero normal");
    n /= len;
    offsets[i] /= len;  // keep <n,x> <= o equivalent under unit normals
  }
  if (interior_witness.size() != dim || !interior_witness.allFinite())
    throw ConfigError("halfspace_intersection: bad witness");
  ConvexDomain d;
  d.kind_ = DomainKind::halfspace_intersection;
  d.dim_ = dim;
  d.normals_ = std::move(normals);
  d.offsets_ = std::move(offsets);
  d.witness_ = std::move(interior_witness);
  for (size_t i = 0; i < d.normals_.size(); ++i) {
    // nonempty interior (H1): the witness must be strictly inside every halfspace
    if (!(d.normals_[i].dot(d.witness_) < d.offsets_[i]))
      throw ConfigError("halfspace_intersection: witness not strictly interior");
  }
  return d;
}

Vec ConvexDomain::project(const Vec& point) const {
  require_finite(point, "project");
  if (point.size() != dim_) throw UsageError("project: dimension mismatch");
  switch (kind_) {
    case DomainKind::whole_space:
      return point;
    case DomainKind::box:
      return clamp_box(point, lower_, upper_);
    case DomainKind::ball: {
      Vec diff = point - center_;
      const double r = diff.norm();
      if (r <= radius_) return point;
      return center_ + diff * (radius_ / r);
    }
    case DomainKind::halfspace_intersection: {
      // Dykstra's algorithm over the halfspaces.
      Vec x = point;
      const size_t m = normals_.size();
      std::vector<Vec> corr(m, Vec::Zero(dim_));
      for (int it = 0; it < kDykstraCap; ++it) {
        double moved = 0.0;
        for (size_t i = 0; i < m; ++i) {
          Vec y = x + corr[i];
          const double viol = normals_[i].dot(y) - offsets_[i];
          Vec xnew = viol > 0.0 ? Vec(y - viol * normals_[i]) : y;
          corr[i] = y - xnew;
          moved += (xnew - x).norm();
          x = xnew;
        }
        if (moved < kDykstraTol) break;
      }
      return x;
    }
  }
  throw std::logic_error("unreachable");
}

double ConvexDomain::distance(const Vec& point) const {
  if (kind_ == DomainKind::whole_space) return 0.0;
  return (point - project(point)).norm();
}

bool ConvexDomain::contains(const Vec& point, double tol) const {
  return distance(point) <= tol;
}

Vec ConvexDomain::interior_point() const { return witness_; }

double ConvexDomain::boundary_distance(const Vec& point) const {
  switch (kind_) {
    case DomainKind::whole_space:
      return std::numeric_limits<double>::infinity();
    case DomainKind::box: {
      double d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < dim_; ++i) {
        if (std::isfinite(lower_[i])) d = std::min(d, point[i] - lower_[i]);
        if (std::isfinite(upper_[i])) d = std::min(d, upper_[i] - point[i]);
      }
      return d;
    }
    case DomainKind::ball:
      return radius_ - (point - center_).norm();
    case DomainKind::halfspace_intersection: {
      double d = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < normals_.size(); ++i)
        d = std::min(d, offsets_[i] - normals_[i].dot(point));
      return d;
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<Vec> ConvexDomain::active_normals(const Vec& point, double tol) const {
  std::vector<Vec> out;
  switch (kind_) {
    case DomainKind::whole_space:
      break;
    case DomainKind::box:
      for (int i = 0; i < dim_; ++i) {
        if (std::isfinite(lower_[i]) && point[i] - lower_[i] <= tol) {
          Vec n = Vec::Zero(dim_);
          n[i] = -1.0;
          out.push_back(n);
        }
        if (std::isfinite(upper_[i]) && upper_[i] - point[i] <= tol) {
          Vec n = Vec::Zero(dim_);
          n[i] = 1.0;
          out.push_back(n);
        }
      }
      break;
    case DomainKind::ball: {
      Vec diff = point - center_;
      if (radius_ - diff.norm() <= tol && diff.norm() > 0) out.push_back(diff.normalized());
      break;
    }
    case DomainKind::halfspace_intersection:
      for (size_t i = 0; i < normals_.size(); ++i)
        if (offsets_[i] - normals_[i].dot(point) <= tol) out.push_back(normals_[i]);
      break;
  }
  return out;
}

Vec project(const ConvexDomain& domain, const Vec& point) { return domain.project(point); }

namespace {

void check_psd(const Mat& m) {
  if (m.rows() != m.cols()) throw ConfigError("linear operator: matrix not square");
  if (!m.allFinite()) throw ConfigError("linear operator: non-finite entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw ConfigError("linear operator: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw ConfigError("linear operator: matrix must be positive semidefinite");
}

}  // namespace

MonotoneOperator MonotoneOperator::zero(int dim) {
  MonotoneOperator op;
  op.kind_ = OperatorKind::zero;
  op.domain_ = ConvexDomain::whole_space(dim);
  return op;
}

MonotoneOperator MonotoneOperator::normal_cone(ConvexDomain domain) {
  MonotoneOperator op;
  op.kind_ = OperatorKind::normal_cone;
  op.domain_ = std::move(domain);
  return op;
}

MonotoneOperator MonotoneOperator::linear(Mat psd) {
  check_psd(psd);
  MonotoneOperator op;
  op.kind_ = OperatorKind::linear;
  op.domain_ = ConvexDomain::whole_space(static_cast<int>(psd.rows()));
  op.matrix_ = std::move(psd);
  return op;
}

MonotoneOperator MonotoneOperator::sum(ConvexDomain domain, Mat psd) {
  check_psd(psd);
  if (psd.rows() != domain.dim()) throw ConfigError("sum operator: dimension mismatch");
  MonotoneOperator op;
  op.kind_ = OperatorKind::sum;
  op.domain_ = std::move(domain);
  op.matrix_ = std::move(psd);
  return op;
}

Vec MonotoneOperator::resolvent(double lambda, const Vec& point) const {
  if (!(lambda > 0.0)) throw UsageError("resolvent: lambda must be > 0");
  require_finite(point, "resolvent");
  if (point.size() != dim()) throw UsageError("resolvent: dimension mismatch");
  switch (kind_) {
    case OperatorKind::zero:
      return point;
    case OperatorKind::normal_cone:
      return domain_.project(point);
    case OperatorKind::linear: {
      Mat a = Mat::Identity(dim(), dim()) + lambda * matrix_;
      return a.llt().solve(point);
    }
    case OperatorKind::sum: {
      // argmin_{y in D} 0.5 <y,(I+lambda M)y> - <point,y>, by projected gradient.
      // Step 1/(1+lambda*mu_max) contracts with factor lambda*mu_max/(1+lambda*mu_max).
      Eigen::SelfAdjointEigenSolver<Mat> es(matrix_);
      const double mu_max = es.eigenvalues().maxCoeff();
      const double step = 1.0 / (1.0 + lambda * mu_max);
      Vec y = domain_.project(point);
      for (int it = 0; it < 1000; ++it) {
        Vec grad = y + lambda * (matrix_ * y) - point;
        Vec ynew = domain_.project(y - step * grad);
        const double moved = (ynew - y).norm();
        y = ynew;
        if (moved < 1e-14 * (1.0 + y.norm())) break;
      }
      return y;
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<Vec> sample_domain_points(const ConvexDomain& domain, int count, double radius,
                                      uint64_t seed) {
  if (count < 1) throw UsageError("sample_domain_points: count >= 1");
  std::vector<Vec> out;
  out.reserve(count);
  const int d = domain.dim();
  const Vec w = domain.interior_point();
  for (int i = 0; i < count; ++i) {
    CounterStream st(seed, static_cast<uint32_t>(i), 0, channel::sampler);
    Vec g(d);
    for (int k = 0; k < d; ++k) g[k] = st.normal();
    // candidate around the witness, projected into the domain
    Vec cand = w + radius * st.u01() * g;
    out.push_back(domain.project(cand));
  }
  return out;
}

std::vector<GraphPair> graph_sample(const MonotoneOperator& op, int count, double radius,
                                    uint64_t seed) {
  if (count < 1) throw UsageError("graph_sample: count >= 1");
  if (!(radius > 0.0)) throw UsageError("graph_sample: radius > 0");
  const int d = op.dim();
  const ConvexDomain& dom = op.domain();

  if (!dom.is_whole_space()) {
    const double dist0 = Vec(Vec::Zero(d) - dom.project(Vec::Zero(d))).norm();
    if (dist0 > radius)
      throw EmptySampleError("graph_sample: radius smaller than distance from origin to domain");
  }

  const bool has_cone = op.kind() == OperatorKind::normal_cone || op.kind() == OperatorKind::sum;
  const bool has_linear = op.kind() == OperatorKind::linear || op.kind() == OperatorKind::sum;
  constexpr double kBoundaryTol = 1e-9;

  std::vector<GraphPair> pairs;
  pairs.reserve(count);
  int idx = 0;
  int attempts = 0;
  while (static_cast<int>(pairs.size()) < count && attempts < 100 * count + 100) {
    CounterStream st(seed, static_cast<uint32_t>(idx++), 1, channel::sampler);
    ++attempts;
    Vec g(d);
    for (int k = 0; k < d; ++k) g[k] = st.normal();

    GraphPair p;
    const bool boundary_try = has_cone && (st.u01() < 0.5);
    if (boundary_try) {
      // push far along a random direction and project: lands on the boundary
      Vec far = dom.interior_point() + (10.0 * radius + 10.0) * g;
      p.x = dom.project(far);
    } else {
      Vec cand = dom.is_whole_space() ? Vec(radius * st.u01() * g)
                                      : Vec(dom.interior_point() + radius * st.u01() * g);
      p.x = dom.project(cand);
    }
    if (p.x.norm() > radius) continue;

    p.xstar = Vec::Zero(d);
    if (has_linear) p.xstar += op.matrix() * p.x;
    if (has_cone) {
      auto normals = dom.active_normals(p.x, kBoundaryTol);
      if (!normals.empty()) {
        Vec n = Vec::Zero(d);
        for (const auto& nv : normals) n += st.u01() * nv;
        p.xstar += (2.0 * st.u01()) * n;
      }
    }
    pairs.push_back(std::move(p));
  }
  if (static_cast<int>(pairs.size()) < count)
    throw EmptySampleError("graph_sample: could not draw enough pairs within radius");
  return pairs;
}

}  // namespace mmv
