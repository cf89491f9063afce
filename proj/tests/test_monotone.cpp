#include <doctest.h>

#include <cmath>
#include <limits>

#include "mmv/monotone.hpp"
#include "mmv/rng.hpp"

using namespace mmv;

namespace {

Vec v1(double a) {
  Vec v(1);
  v[0] = a;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v[0] = a;
  v[1] = b;
  return v;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exhaustive active-set projection oracle for halfspace intersections:
// enumerate constraint subsets, solve the equality-constrained least squares
// via the KKT system on the active normals, keep feasible candidates.
Vec project_oracle(const ConvexDomain& dom, const Vec& p) {
  const auto& normals = dom.normals();
  const auto& offsets = dom.offsets();
  const int m = static_cast<int>(normals.size());
  const int d = dom.dim();
  Vec best = dom.interior_point();
  double best_dist = (p - best).norm();
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) act.push_back(i);
    const int k = static_cast<int>(act.size());
    if (k > d) continue;
    Vec cand(d);
    if (k == 0) {
      cand = p;
    } else {
      // minimize |x - p|^2 s.t. N x = o  ->  x = p - N^T (N N^T)^{-1} (N p - o)
      Eigen::MatrixXd n(k, d);
      Eigen::VectorXd resid(k);
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < d; ++c) n(r, c) = normals[act[r]][c];
        resid(r) = normals[act[r]].dot(p) - offsets[act[r]];
      }
      Eigen::MatrixXd gram = n * n.transpose();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (lu.rank() < k) continue;
      Eigen::VectorXd lambda = lu.solve(resid);
      Eigen::VectorXd x = Eigen::VectorXd(d);
      for (int c = 0; c < d; ++c) x(c) = p[c];
      x -= n.transpose() * lambda;
      for (int c = 0; c < d; ++c) cand[c] = x(c);
    }
    bool feasible = true;
    for (int i = 0; i < m; ++i)
      if (normals[i].dot(cand) > offsets[i] + 1e-10) feasible = false;
    if (!feasible) continue;
    const double dist = (p - cand).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

ConvexDomain simplex2() {
  // 2-simplex {x >= 0, x0 + x1 <= 1}
  return ConvexDomain::halfspace_intersection(
      {v2(-1, 0), v2(0, -1), v2(1, 1)}, {0.0, 0.0, 1.0}, v2(0.25, 0.25));
}

}  // namespace

TEST_CASE("domain constructors reject degenerate sets") {
  CHECK_THROWS_AS(ConvexDomain::box(v1(1), v1(1)), ConfigError);
  CHECK_THROWS_AS(ConvexDomain::box(v1(2), v1(1)), ConfigError);
  CHECK_THROWS_AS(ConvexDomain::ball(v2(0, 0), 0.0), ConfigError);
  CHECK_THROWS_AS(ConvexDomain::ball(v2(0, 0), -1.0), ConfigError);
  // witness on the boundary is not strictly interior
  CHECK_THROWS_AS(
      ConvexDomain::halfspace_intersection({v1(-1)}, {0.0}, v1(0.0)), ConfigError);
}

TEST_CASE("projection closed forms") {
  const auto ball = ConvexDomain::ball(v2(0, 0), 1.0);
  CHECK((ball.project(v2(2, 0)) - v2(1, 0)).norm() == doctest::Approx(0.0).epsilon(1e-14));

  const auto box = ConvexDomain::box(v2(0, 0), v2(1, 1));
  CHECK((box.project(v2(-0.5, 0.5)) - v2(0, 0.5)).norm() == doctest::Approx(0.0).epsilon(1e-14));

  // half-line as a box with an infinite bound
  const auto halfline = ConvexDomain::box(v1(0), v1(kInf));
  CHECK(halfline.project(v1(-0.7))[0] == 0.0);
  CHECK(halfline.project(v1(0.3))[0] == 0.3);

  CHECK_THROWS_AS(ball.project(v2(std::nan(""), 0)), InvalidInputError);
}

TEST_CASE("simplex projection matches the active-set oracle") {
  const auto dom = simplex2();
  // hand-checked: projecting (1,1) onto the 2-simplex lands at (1/2, 1/2)
  const Vec p = dom.project(v2(1, 1));
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-10));

  CounterStream st(404, 0, 0, channel::sampler);
  for (int i = 0; i < 200; ++i) {
    const Vec q = v2(4.0 * st.normal(), 4.0 * st.normal());
    const Vec got = dom.project(q);
    const Vec want = project_oracle(dom, q);
    CAPTURE(q[0]);
    CAPTURE(q[1]);
    CHECK((got - want).norm() < 1e-9);
  }
}

TEST_CASE("projection is idempotent and nonexpansive") {
  const auto doms = {simplex2(), ConvexDomain::ball(v2(0.5, -0.5), 2.0),
                     ConvexDomain::box(v2(-1, 0), v2(1, kInf))};
  for (const auto& dom : doms) {
    CounterStream st(7, 0, 0, channel::sampler);
    for (int i = 0; i < 100; ++i) {
      const Vec p = v2(5 * st.normal(), 5 * st.normal());
      const Vec q = v2(5 * st.normal(), 5 * st.normal());
      const Vec pp = dom.project(p);
      CHECK((dom.project(pp) - pp).norm() <= 1e-12);
      CHECK((dom.project(p) - dom.project(q)).norm() <= (p - q).norm() + 1e-12);
    }
  }
}

TEST_CASE("projection variational characterization on sampled domain points") {
  const auto dom = simplex2();
  const auto samples = sample_domain_points(dom, 100, 1.0, 11);
  CounterStream st(12, 0, 0, channel::sampler);
  for (int i = 0; i < 20; ++i) {
    const Vec p = v2(3 * st.normal(), 3 * st.normal());
    const Vec out = dom.project(p);
    for (const auto& y : samples) CHECK((p - out).dot(y - out) <= 1e-10);
  }
}

TEST_CASE("resolvent closed forms") {
  // zero operator: identity
  const auto zero = MonotoneOperator::zero(2);
  CHECK((zero.resolvent(0.5, v2(1, 2)) - v2(1, 2)).norm() == 0.0);

  // linear scalar: (1 + lambda)^{-1} * p
  Mat one = Mat::Identity(1, 1);
  const auto lin = MonotoneOperator::linear(one);
  CHECK(lin.resolvent(1.0, v1(2.0))[0] == doctest::Approx(1.0).epsilon(1e-14));

  // normal cone of [0, inf): projection, lambda-independent
  const auto cone = MonotoneOperator::normal_cone(ConvexDomain::box(v1(0), v1(kInf)));
  CHECK(cone.resolvent(0.5, v1(-0.7))[0] == 0.0);

  CHECK_THROWS_AS(zero.resolvent(0.0, v2(0, 0)), UsageError);
  CHECK_THROWS_AS(MonotoneOperator::linear(Mat(-Mat::Identity(2, 2))), ConfigError);
}

TEST_CASE("sum resolvent solves the constrained problem") {
  // A = N_{[0,inf)} + M with M = 2: resolvent solves (1 + 2 lambda) y = p on y >= 0
  Mat m2 = 2.0 * Mat::Identity(1, 1);
  const auto op = MonotoneOperator::sum(ConvexDomain::box(v1(0), v1(kInf)), m2);
  CHECK(op.resolvent(0.5, v1(4.0))[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(op.resolvent(0.5, v1(-3.0))[0] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("resolvent is a contraction") {
  const auto ops = {MonotoneOperator::normal_cone(simplex2()),
                    MonotoneOperator::sum(ConvexDomain::ball(v2(0, 0), 1.5),
                                          Mat(0.7 * Mat::Identity(2, 2)))};
  for (const auto& op : ops) {
    CounterStream st(99, 0, 0, channel::sampler);
    for (int i = 0; i < 50; ++i) {
      const Vec p = v2(3 * st.normal(), 3 * st.normal());
      const Vec q = v2(3 * st.normal(), 3 * st.normal());
      for (double lam : {0.01, 0.3, 2.0}) {
        CHECK((op.resolvent(lam, p) - op.resolvent(lam, q)).norm() <= (p - q).norm() + 1e-10);
      }
    }
  }
}

TEST_CASE("graph_sample: zero operator pairs with 0") {
  const auto pairs = graph_sample(MonotoneOperator::zero(2), 20, 3.0, 5);
  CHECK(pairs.size() == 20);
  for (const auto& p : pairs) {
    CHECK(p.x.norm() <= 3.0);
    CHECK(p.xstar.norm() == 0.0);
  }
}

TEST_CASE("graph_sample: ball boundary normals point outward") {
  const auto op = MonotoneOperator::normal_cone(ConvexDomain::ball(v2(0, 0), 1.0));
  const auto pairs = graph_sample(op, 60, 2.0, 6);
  bool saw_boundary = false;
  for (const auto& p : pairs) {
    if (p.xstar.norm() > 1e-12) {
      saw_boundary = true;
      // outward normal at x on the unit sphere is parallel to x
      CHECK(p.xstar.dot(p.x) >= 0.0);
      const double cross = p.xstar[0] * p.x[1] - p.xstar[1] * p.x[0];
      CHECK(std::abs(cross) < 1e-9 * p.xstar.norm());
    }
  }
  CHECK(saw_boundary);
}

TEST_CASE("graph_sample monotonicity holds pairwise") {
  const auto ops = {MonotoneOperator::normal_cone(simplex2()),
                    MonotoneOperator::linear(Mat(1.5 * Mat::Identity(2, 2))),
                    MonotoneOperator::sum(ConvexDomain::box(v2(0, -1), v2(2, 1)),
                                          Mat(0.5 * Mat::Identity(2, 2)))};
  for (const auto& op : ops) {
    const auto pairs = graph_sample(op, 40, 4.0, 31);
    for (size_t i = 0; i < pairs.size(); ++i)
      for (size_t j = 0; j < pairs.size(); ++j)
        CHECK((pairs[i].x - pairs[j].x).dot(pairs[i].xstar - pairs[j].xstar) >= -1e-10);
  }
}

TEST_CASE("graph_sample: radius below the domain distance is an error") {
  const auto op = MonotoneOperator::normal_cone(ConvexDomain::ball(v2(10, 0), 1.0));
  CHECK_THROWS_AS(graph_sample(op, 5, 2.0, 1), EmptySampleError);
}

TEST_CASE("resolvent output satisfies the normal-cone inequality") {
  const auto dom = ConvexDomain::ball(v2(0.3, 0), 1.2);
  const auto op = MonotoneOperator::normal_cone(dom);
  const auto samples = sample_domain_points(dom, 100, 2.0, 77);
  CounterStream st(78, 0, 0, channel::sampler);
  for (int i = 0; i < 25; ++i) {
    const Vec p = v2(4 * st.normal(), 4 * st.normal());
    const Vec out = op.resolvent(0.25, p);
    for (const auto& y : samples) CHECK((p - out).dot(y - out) <= 1e-10);
  }
}
