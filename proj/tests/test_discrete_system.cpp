#include <cmath>
#include <random>

#include "doctest.h"
#include "entrolevel/discrete_system.hpp"
#include "entrolevel/property_checks.hpp"

using namespace entrolevel;

namespace {

struct Fixture {
  SplineSystem sys;
  DofLayout L;
  InterfaceModel m;
  Fixture(int n, InterfaceModel model, Box box = Box{})
      : sys(2, {n, n, 1}, box), L(build_dof_layout(sys, BoundarySpec::no_penetration(2))), m(model) {}
};

void set_block(State& s, const DofLayout& L, Block b, int comp, const Eigen::VectorXd& v) {
  s.coeffs.segment(L.begin(b, comp), L.size(b, comp)) = v;
}

// Velocity mass matrix times coefficients, integrated independently of the assembler.
Eigen::VectorXd mass_times(const SplineSystem& sys, const DofLayout& L, const State& s) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(L.n_total());
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, 5);
    for (std::size_t k = 0; k < q.xi.size(); ++k)
      for (int c = 0; c < 2; ++c) {
        const BasisEval b = sys.eval_basis(velocity_space(c), e, q.xi[k]);
        double uval = 0.0;
        for (int l = 0; l < b.size(); ++l) uval += b.value[l] * s.coeffs[L.begin(Block::velocity, c) + b.global[l]];
        for (int l = 0; l < b.size(); ++l) out[L.begin(Block::velocity, c) + b.global[l]] += q.weight[k] * uval * b.value[l];
      }
  }
  return out;
}

InterfaceModel two_fluid() {
  InterfaceModel m;
  m.eps = 0.15;
  m.rho1 = 5.0;
  m.rho2 = 1.0;
  m.mu1 = 0.3;
  m.mu2 = 0.1;
  return m;
}

}  // namespace

TEST_CASE("supg time scale") {
  SplineSystem sys(2, {2, 2, 1}, Box{});
  const auto em = sys.mesh_metrics(0);
  CHECK(tau_supg({1.0, 2.0, 0.0}, em, 0.1) == doctest::Approx(1.0 / std::sqrt(400.0 + 16.0 + 64.0)));
  CHECK(tau_supg({0.0, 0.0, 0.0}, em, 0.1) == doctest::Approx(0.05));
}

TEST_CASE("momentum residual equals the mass matrix term at vanishing midpoint velocity") {
  InterfaceModel m;
  m.eps = 0.1;
  m.rho1 = 3.0;
  m.rho2 = 1.0;
  Fixture f(5, m);
  Assembler as(f.sys, f.L, f.m);
  SchemeParams prm;
  prm.dt = 0.05;
  prm.dc_constant = 0.4;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  State next = zero_state(f.L);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < f.L.size(Block::velocity, c); ++i) next.coeffs[f.L.begin(Block::velocity, c) + i] = u(rng);
  for (int g : f.L.constrained) next.coeffs[g] = 0.0;
  set_block(next, f.L, Block::levelset, 0, Eigen::VectorXd::Constant(f.L.size(Block::levelset), 2.0));
  State prev = next;
  for (int c = 0; c < 2; ++c) prev.coeffs.segment(f.L.begin(Block::velocity, c), f.L.size(Block::velocity, c)) *= -1.0;
  for (Scheme sch : {Scheme::entropy_stable, Scheme::standard_midpoint}) {
    prm.scheme = sch;
    const Eigen::VectorXd r = as.residual(prev, next, 0.0, prm);
    const Eigen::VectorXd oracle = as.reduce(mass_times(f.sys, f.L, next) * (2.0 * m.rho1 / prm.dt));
    CHECK((r - oracle).norm() <= 1e-11 * oracle.norm());
  }
}

TEST_CASE("quiescent planar state is an exact steady state") {
  InterfaceModel m = two_fluid();
  Fixture f(6, m);
  Assembler as(f.sys, f.L, f.m);
  State s = zero_state(f.L);
  set_block(s, f.L, Block::levelset, 0,
            project_l2(f.sys, SpaceId::levelset, [](const std::array<double, 3>& x) { return 0.45 - x[0]; }));
  for (Scheme sch : {Scheme::entropy_stable, Scheme::standard_midpoint}) {
    SchemeParams prm;
    prm.dt = 0.01;
    prm.scheme = sch;
    prm.dc_constant = 0.4;
    CHECK(as.residual(s, s, 0.0, prm).norm() <= 1e-12);
  }
}

TEST_CASE("hydrostatic pressure balances gravity in a single fluid") {
  InterfaceModel m;
  m.rho1 = m.rho2 = 2.0;
  m.mu1 = m.mu2 = 0.1;
  Fixture f(6, m);
  Assembler as(f.sys, f.L, f.m);
  SchemeParams prm;
  prm.dt = 0.01;
  prm.groups.inv_froude_sq = 9.81;
  prm.dc_constant = 0.4;
  State s = zero_state(f.L);
  set_block(s, f.L, Block::pressure, 0, project_l2(f.sys, SpaceId::pressure, [](const std::array<double, 3>& x) {
              return -9.81 * 2.0 * (x[1] - 0.5);
            }));
  set_block(s, f.L, Block::levelset, 0, Eigen::VectorXd::Constant(f.L.size(Block::levelset), 1.0));
  CHECK(as.residual(s, s, 0.0, prm).norm() <= 1e-10);
}

TEST_CASE("schemes coincide without surface tension at matched density") {
  InterfaceModel m;
  m.eps = 0.1;
  m.mu1 = 0.2;
  m.mu2 = 0.05;
  Fixture f(6, m);
  Assembler as(f.sys, f.L, f.m);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  State prev = zero_state(f.L), next = zero_state(f.L);
  for (int g = 0; g < f.L.begin(Block::aux); ++g) {
    prev.coeffs[g] = u(rng);
    next.coeffs[g] = u(rng);
  }
  for (int g : f.L.constrained) prev.coeffs[g] = next.coeffs[g] = 0.0;
  SchemeParams a, b;
  a.dt = b.dt = 0.02;
  a.dc_constant = b.dc_constant = 0.3;
  b.scheme = Scheme::standard_midpoint;
  const Eigen::VectorXd ra = as.residual(prev, next, 0.1, a), rb = as.residual(prev, next, 0.1, b);
  CHECK((ra - rb).norm() <= 1e-12 * ra.norm());
}

TEST_CASE("single-fluid momentum does not see the level set") {
  InterfaceModel m;
  m.eps = 0.1;
  m.rho1 = m.rho2 = 1.5;
  m.mu1 = m.mu2 = 0.1;
  Fixture f(5, m);
  Assembler as(f.sys, f.L, f.m);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  State prev = zero_state(f.L), next = zero_state(f.L);
  for (int g = 0; g < f.L.begin(Block::levelset); ++g) {
    prev.coeffs[g] = u(rng);
    next.coeffs[g] = u(rng);
  }
  for (int g : f.L.constrained) prev.coeffs[g] = next.coeffs[g] = 0.0;
  SchemeParams prm;
  prm.dt = 0.02;
  const Eigen::VectorXd r0 = as.residual(prev, next, 0.0, prm);
  State p2 = prev, n2 = next;
  for (int i = 0; i < f.L.size(Block::levelset); ++i) {
    p2.coeffs[f.L.begin(Block::levelset) + i] = u(rng);
    n2.coeffs[f.L.begin(Block::levelset) + i] = u(rng);
  }
  const Eigen::VectorXd r1 = as.residual(p2, n2, 0.0, prm);
  const int nmom = f.L.reduced[f.L.begin(Block::pressure)];
  CHECK((r0.head(nmom) - r1.head(nmom)).norm() <= 1e-12 * r0.head(nmom).norm());
}

TEST_CASE("consistent auxiliary field zeroes the auxiliary rows") {
  InterfaceModel m = two_fluid();
  Fixture f(8, m);
  Assembler as(f.sys, f.L, f.m);
  SchemeParams prm;
  prm.dt = 0.01;
  prm.groups.weber = 10.0;
  State s = zero_state(f.L);
  set_block(s, f.L, Block::levelset, 0, project_l2(f.sys, SpaceId::levelset, [](const std::array<double, 3>& x) {
              return 0.3 - std::hypot(x[0] - 0.5, x[1] - 0.5);
            }));
  set_block(s, f.L, Block::aux, 0, as.consistent_aux(s, prm));
  const Eigen::VectorXd r = as.residual(s, s, 0.0, prm);
  const int a0 = f.L.reduced[f.L.begin(Block::aux)];
  CHECK(r.segment(a0, f.L.size(Block::aux)).norm() <= 1e-10);
}

TEST_CASE("jacobian matches central differences") {
  for (Scheme sch : {Scheme::entropy_stable, Scheme::standard_midpoint}) {
    const auto c = jacobian_fd_study(8, 6, 1e-7, sch);
    CHECK(c.max_rel_error <= 1e-6);
  }
}

TEST_CASE("jacobian residual agrees with the residual sweep") {
  InterfaceModel m = two_fluid();
  Fixture f(6, m);
  Assembler as(f.sys, f.L, f.m);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  State prev = zero_state(f.L), next = zero_state(f.L);
  for (int g = 0; g < f.L.n_total(); ++g) {
    prev.coeffs[g] = u(rng);
    next.coeffs[g] = u(rng);
  }
  SchemeParams prm;
  prm.dt = 0.02;
  prm.dc_constant = 0.4;
  prm.groups.weber = 5.0;
  prm.groups.inv_froude_sq = 1.0;
  SparseMatrix J;
  Eigen::VectorXd r;
  as.jacobian(prev, next, 0.2, prm, J, &r);
  CHECK((r - as.residual(prev, next, 0.2, prm)).norm() <= 1e-13 * r.norm());
  CHECK(J.rows() == as.n_reduced());
  CHECK(J.nonZeros() == as.pattern().nonZeros());
  CHECK(as.theta_dc(3, prev, next, prm) > 0.0);
  prm.dc_constant = 0.0;
  CHECK(as.theta_dc(3, prev, next, prm) == 0.0);
}

TEST_CASE("alternative surface-tension identity") {
  const auto st = alt_identity_study({10, 20}, 0.15, 0);
  REQUIRE(st.defects.size() == 2);
  CHECK(st.defects[1] < st.defects[0]);
  SplineSystem sys(2, {8, 8, 1}, Box{});
  const auto phi = project_l2(sys, SpaceId::levelset, [](const std::array<double, 3>& x) { return 0.3 - x[0]; });
  std::array<Eigen::VectorXd, 3> w{Eigen::VectorXd::Zero(sys.velocity(0).size()),
                                   Eigen::VectorXd::Zero(sys.velocity(1).size()), Eigen::VectorXd()};
  const AltIdentity zero = surface_tension_alt_identity_check(sys, phi, w, 0.1, 0.0);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  w[0] = project_l2(sys, velocity_space(0), [](const std::array<double, 3>& x) { return x[1] * (1 - x[1]); });
  w[1] = project_l2(sys, velocity_space(1), [](const std::array<double, 3>& x) { return x[0]; });
  const AltIdentity planar = surface_tension_alt_identity_check(sys, phi, w, 0.1, 0.0);
  CHECK(std::abs(planar.lhs) <= 1e-10);
  CHECK(std::abs(planar.rhs) <= 1e-10);
}
