#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "entrolevel/spline_spaces.hpp"

using namespace entrolevel;

TEST_CASE("open uniform knot vectors") {
  const auto kv = KnotVector::open_uniform(3, 5);
  CHECK(kv.knots.size() == 5 + 2 * 3 + 1);
  CHECK(kv.n_basis() == 8);
  CHECK(kv.knots.front() == -1.0);
  CHECK(kv.knots.back() == 1.0);
  KnotVector bad{2, {0.0, 0.0, 0.0, 0.5, 0.4, 1.0, 1.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("univariate basis partition of unity and derivatives") {
  for (int p : {2, 3}) {
    BSplineBasis1D b(KnotVector::open_uniform(p, 7));
    std::vector<double> out(3 * (p + 1)), op(3 * (p + 1)), om(3 * (p + 1));
    for (int e = 0; e < b.n_elements(); ++e)
      for (double t : {0.1, 0.5, 0.93}) {
        const double xi = b.element_lo(e) + t * (b.element_hi(e) - b.element_lo(e));
        b.eval(e, xi, 2, out.data());
        double s0 = 0, s1 = 0, s2 = 0;
        for (int a = 0; a <= p; ++a) {
          s0 += out[a];
          s1 += out[(p + 1) + a];
          s2 += out[2 * (p + 1) + a];
          CHECK(out[a] >= -1e-15);
        }
        CHECK(s0 == doctest::Approx(1.0));
        CHECK(s1 == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(s2 == doctest::Approx(0.0).epsilon(1e-10));
        const double h = 1e-6;
        b.eval(e, xi + h, 1, op.data());
        b.eval(e, xi - h, 1, om.data());
        for (int a = 0; a <= p; ++a) {
          CHECK(out[(p + 1) + a] == doctest::Approx((op[a] - om[a]) / (2 * h)).epsilon(1e-6));
          CHECK(out[2 * (p + 1) + a] == doctest::Approx((op[(p + 1) + a] - om[(p + 1) + a]) / (2 * h)).epsilon(1e-5));
        }
      }
    CHECK(b.find_element(-1.0) == 0);
    CHECK(b.find_element(1.0) == b.n_elements() - 1);
  }
}

TEST_CASE("physical basis gradients on a stretched box") {
  Box box;
  box.lo = {1.0, -2.0, 0.0};
  box.hi = {4.0, 0.5, 1.0};
  SplineSystem sys(2, {3, 4, 1}, box);
  const int e = 5;
  const std::array<double, 3> xi{-0.1, 0.3, 0.0};
  for (SpaceId id : {SpaceId::velocity_x, SpaceId::velocity_y, SpaceId::levelset}) {
    const BasisEval b = sys.eval_basis(id, e, xi);
    for (int d = 0; d < 2; ++d) {
      const double hp = 1e-6;
      auto xp = xi, xm = xi;
      xp[d] += hp;
      xm[d] -= hp;
      const BasisEval bp = sys.eval_basis(id, e, xp), bm = sys.eval_basis(id, e, xm);
      for (int l = 0; l < b.size(); ++l) {
        const double fd = (bp.value[l] - bm.value[l]) / (2 * hp) / sys.scale(d);
        CHECK(b.grad[l * 2 + d] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
  CHECK(sys.to_physical({-1.0, 1.0, 0.0})[0] == doctest::Approx(1.0));
  CHECK(sys.to_physical({-1.0, 1.0, 0.0})[1] == doctest::Approx(0.5));
  const auto x = sys.to_physical(xi);
  const auto back = sys.to_parametric(x);
  CHECK(back[0] == doctest::Approx(xi[0]));
  CHECK(back[1] == doctest::Approx(xi[1]));
}

TEST_CASE("element size is the physical diagonal") {
  SplineSystem unit(2, {2, 2, 1}, Box{});
  CHECK(unit.mesh_metrics(0).h == doctest::Approx(std::sqrt(0.5)));
  Box b8;
  b8.hi = {8.0, 8.0, 1.0};
  SplineSystem sys(2, {20, 20, 1}, b8);
  CHECK(sys.mesh_metrics(17).h == doctest::Approx(0.4 * std::sqrt(2.0)));
  CHECK(sys.min_element_diagonal() == doctest::Approx(0.4 * std::sqrt(2.0)));
  CHECK(sys.mesh_metrics(0).h_param == doctest::Approx(0.1 * std::sqrt(2.0)));
  CHECK_THROWS_AS(sys.check_element(400), std::out_of_range);
  CHECK_THROWS_AS(sys.mesh_metrics(-1), std::out_of_range);
}

TEST_CASE("element quadrature integrates polynomials exactly") {
  Box box;
  box.lo = {0.0, 1.0, 0.0};
  box.hi = {2.0, 3.0, 1.0};
  SplineSystem sys(2, {3, 5, 1}, box);
  double area = 0.0, mom = 0.0;
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, 4);
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const auto x = sys.to_physical(q.xi[k]);
      area += q.weight[k];
      mom += q.weight[k] * x[0] * x[0] * x[1] * x[1] * x[1];
    }
  }
  CHECK(area == doctest::Approx(4.0));
  // int_0^2 x^2 dx * int_1^3 y^3 dy
  CHECK(mom == doctest::Approx(8.0 / 3.0 * 20.0));
}

TEST_CASE("L2 projection reproduces functions in the space") {
  SplineSystem sys(2, {4, 3, 1}, Box{});
  auto quad = [](const std::array<double, 3>& x) { return 1.0 + x[0] - 2.0 * x[1] * x[1] + 3.0 * x[0] * x[1]; };
  const auto c = project_l2(sys, SpaceId::pressure, quad);
  auto cubic = [](const std::array<double, 3>& x) { return x[0] * x[0] * x[0] - x[1] * x[1] * x[0]; };
  const auto cu = project_l2(sys, SpaceId::velocity_x, cubic);
  for (int e = 0; e < sys.n_elements(); ++e) {
    const std::array<double, 3> xi = {sys.element_point(sys.element_multi(e)[0], 0, 0.3),
                                      sys.element_point(sys.element_multi(e)[1], 1, -0.6), 0.0};
    const auto x = sys.to_physical(xi);
    CHECK(eval_field(sys, SpaceId::pressure, c.data(), e, xi).value == doctest::Approx(quad(x)).epsilon(1e-10));
    CHECK(eval_field(sys, SpaceId::velocity_x, cu.data(), e, xi).value == doctest::Approx(cubic(x)).epsilon(1e-10));
    const auto f = eval_field(sys, SpaceId::pressure, c.data(), e, xi);
    CHECK(f.grad[0] == doctest::Approx(1.0 + 3.0 * x[1]).epsilon(1e-9));
    CHECK(f.hess[3] == doctest::Approx(-4.0).epsilon(1e-8));
  }
}

TEST_CASE("velocity divergence lies in the pressure space") {
  Box box;
  box.hi = {2.0, 1.0, 1.0};
  SplineSystem sys(2, {5, 4, 1}, box);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd ux(sys.velocity(0).size()), uy(sys.velocity(1).size());
  for (auto& v : ux) v = u(rng);
  for (auto& v : uy) v = u(rng);
  auto div = [&](int e, const std::array<double, 3>& xi) {
    return eval_field(sys, SpaceId::velocity_x, ux.data(), e, xi).grad[0] +
           eval_field(sys, SpaceId::velocity_y, uy.data(), e, xi).grad[1];
  };
  const auto pc = project_l2(sys, SpaceId::pressure, [&](const std::array<double, 3>& x) {
    const auto xi = sys.to_parametric(x);
    std::array<int, 3> m{0, 0, 0};
    for (int d = 0; d < 2; ++d) m[d] = sys.space(SpaceId::pressure).dir(d).find_element(xi[d]);
    return div(sys.element_flat(m), xi);
  });
  double worst = 0.0;
  for (int e = 0; e < sys.n_elements(); ++e)
    for (double a : {-0.77, 0.1, 0.6})
      for (double b : {-0.4, 0.35}) {
        const auto mi = sys.element_multi(e);
        const std::array<double, 3> xi{sys.element_point(mi[0], 0, a), sys.element_point(mi[1], 1, b), 0.0};
        worst = std::max(worst, std::abs(div(e, xi) - eval_field(sys, SpaceId::pressure, pc.data(), e, xi).value));
      }
  CHECK(worst < 1e-9);
}

TEST_CASE("degree-of-freedom layout") {
  const int n = 4;
  SplineSystem sys(2, {n, n, 1}, Box{});
  const DofLayout L = build_dof_layout(sys, BoundarySpec::no_penetration(2));
  CHECK(L.size(Block::velocity, 0) == (n + 3) * (n + 2));
  CHECK(L.size(Block::velocity, 1) == (n + 2) * (n + 3));
  CHECK(L.size(Block::pressure) == (n + 2) * (n + 2));
  CHECK(L.size(Block::levelset) == (n + 2) * (n + 2));
  CHECK(L.size(Block::aux) == (n + 2) * (n + 2));
  CHECK(static_cast<int>(L.constrained.size()) == 2 * 2 * (n + 2));
  CHECK(L.n_free == L.n_total() - 2 * 2 * (n + 2));
  CHECK(L.mean_pressure_constraint);
  CHECK(L.n_reduced() == L.n_free + 1);
  CHECK(std::accumulate(L.pressure_weights.begin(), L.pressure_weights.end(), 0.0) == doctest::Approx(1.0));
  for (int g : L.constrained) CHECK(L.reduced[g] == -1);
  SplineSystem other(2, {n + 1, n, 1}, Box{});
  CHECK(build_dof_layout(other, BoundarySpec::no_penetration(2)).hash() != L.hash());
  BoundarySpec open;
  const DofLayout Lo = build_dof_layout(sys, open);
  CHECK_FALSE(Lo.mean_pressure_constraint);
  CHECK(Lo.constrained.empty());
}

TEST_CASE("periodic faces are rejected") {
  SplineSystem sys(2, {4, 4, 1}, Box{});
  BoundarySpec bc = BoundarySpec::no_penetration(2);
  bc.faces[0] = bc.faces[1] = FaceCondition::periodic;
  CHECK_THROWS_WITH_AS(build_dof_layout(sys, bc), "unsupported boundary condition: periodic", std::invalid_argument);
}
