#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "mmv/types.hpp"

namespace mmv {

enum class DomainKind { whole_space, box, ball, halfspace_intersection };

/// Closed convex domain with nonempty interior. Box bounds may be infinite
/// (so half-lines and orthants are boxes); halfspace intersections are
/// {x : <n_i, x> <= o_i} and require a strictly interior witness point.
class ConvexDomain {
public:
  static ConvexDomain whole_space(int dim);
  static ConvexDomain box(Vec lower, Vec upper);
  static ConvexDomain ball(Vec center, double radius);
  static ConvexDomain halfspace_intersection(std::vector<Vec> normals, std::vector<double> offsets,
                                             Vec interior_witness);

  int dim() const { return dim_; }
  DomainKind kind() const { return kind_; }

  /// Euclidean nearest point of the closed domain. For halfspace intersections
  /// this runs Dykstra's alternating projections (tol 1e-12, cap 10000).
  Vec project(const Vec& point) const;

  double distance(const Vec& point) const;
  bool contains(const Vec& point, double tol = 1e-12) const;

  /// A strictly interior point (supplied for halfspace intersections, derived otherwise).
  Vec interior_point() const;

  /// Distance from `point` (assumed in the domain) to the boundary.
  double boundary_distance(const Vec& point) const;

  /// Outward normal cone generators active at a boundary point (within tol);
  /// empty for interior points.
  std::vector<Vec> active_normals(const Vec& point, double tol = 1e-9) const;

  bool is_whole_space() const { return kind_ == DomainKind::whole_space; }

  // Parameter access (used by samplers and config round-trips).
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const std::vector<Vec>& normals() const { return normals_; }
  const std::vector<double>& offsets() const { return offsets_; }

  ConvexDomain() = default;  // inert; factories establish the invariants

private:
  DomainKind kind_ = DomainKind::whole_space;
  int dim_ = 0;
  Vec lower_, upper_;             // box
  Vec center_;                    // ball
  double radius_ = 0.0;           // ball
  std::vector<Vec> normals_;      // halfspaces (unit)
  std::vector<double> offsets_;   // halfspaces
  Vec witness_;
};

Vec project(const ConvexDomain& domain, const Vec& point);

enum class OperatorKind { zero, normal_cone, linear, sum };

/// Maximal monotone operator from the closed catalog:
///   zero, the normal cone of a convex domain, a PSD linear map, or
///   normal cone + PSD linear map. The catalog guarantees monotonicity and
///   maximality (Im(I+A) = R^d) by construction.
class MonotoneOperator {
public:
  static MonotoneOperator zero(int dim);
  static MonotoneOperator normal_cone(ConvexDomain domain);
  static MonotoneOperator linear(Mat psd);
  static MonotoneOperator sum(ConvexDomain domain, Mat psd);

  OperatorKind kind() const { return kind_; }
  int dim() const { return domain_.dim(); }
  const ConvexDomain& domain() const { return domain_; }
  const Mat& matrix() const { return matrix_; }

  /// (I + lambda A)^{-1}(point): the unique y with point in y + lambda A(y).
  /// 1-Lipschitz in `point` for every lambda > 0.
  Vec resolvent(double lambda, const Vec& point) const;

private:
  MonotoneOperator() = default;
  OperatorKind kind_ = OperatorKind::zero;
  ConvexDomain domain_;
  Mat matrix_;
};

struct GraphPair {
  Vec x;
  Vec xstar;
};

/// Sample pairs from the graph of A with |x| <= radius. Interior points pair
/// with the linear part (or 0); boundary points additionally pick up scaled
/// outward normals. Deterministic for a fixed seed.
std::vector<GraphPair> graph_sample(const MonotoneOperator& op, int count, double radius,
                                    uint64_t seed);

/// Sample points of the closed domain, biased toward |x| <= radius.
std::vector<Vec> sample_domain_points(const ConvexDomain& domain, int count, double radius,
                                      uint64_t seed);

}  // namespace mmv
