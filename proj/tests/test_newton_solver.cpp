#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "entrolevel/config.hpp"
#include "entrolevel/newton_solver.hpp"

using namespace entrolevel;

TEST_CASE("linear solve on small systems") {
  SparseMatrix I(5, 5);
  I.setIdentity();
  Eigen::VectorXd b(5);
  b << 1, -2, 3, 0.5, 7;
  CHECK((linear_solve(I, b) - b).norm() == 0.0);
  SparseMatrix D(2, 2);
  D.insert(0, 0) = 2.0;
  D.insert(1, 1) = 4.0;
  D.makeCompressed();
  Eigen::VectorXd c(2);
  c << 2, 8;
  const Eigen::VectorXd x = linear_solve(D, c);
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("linear solve agrees with a dense oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 100;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = (std::abs(i - j) < 4 || (i + j) % 17 == 0) ? u(rng) : 0.0;
  const Eigen::MatrixXd A = B * B.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (auto& v : b) v = u(rng);
  const SparseMatrix S = A.sparseView();
  const Eigen::VectorXd x = linear_solve(S, b);
  const Eigen::VectorXd ref = A.ldlt().solve(b);
  CHECK((x - ref).norm() <= 1e-10 * ref.norm());
  CHECK((S * x - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("factorization reuse across matrices with a fixed pattern") {
  SparseMatrix A(3, 3);
  A.insert(0, 0) = 2;
  A.insert(1, 1) = 3;
  A.insert(2, 2) = 4;
  A.insert(0, 2) = 1;
  A.makeCompressed();
  LinearSolver s;
  CHECK_FALSE(s.factorized());
  s.factorize(A);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
  CHECK((A * s.solve(b) - b).norm() < 1e-14);
  A.coeffRef(1, 1) = 7;
  s.factorize(A);
  CHECK((A * s.solve(b) - b).norm() < 1e-14);
  CHECK(s.factorizations() == 2);
}

TEST_CASE("singular and malformed systems are reported") {
  SparseMatrix A(3, 3);
  A.insert(0, 0) = 1;
  A.insert(1, 0) = 1;
  A.insert(2, 2) = 1;
  A.makeCompressed();
  LinearSolver s;
  CHECK_THROWS_AS(s.factorize(A), SingularMatrixError);
  SparseMatrix R(2, 3);
  CHECK_THROWS_AS(s.factorize(R), std::invalid_argument);
}

namespace {

struct Problem {
  Scenario sc;
  SplineSystem sys;
  DofLayout L;
  Assembler as;
  SchemeParams prm;
  explicit Problem(const Scenario& s)
      : sc(s),
        sys(s.dim, s.elements, s.box, s.quad_points),
        L(build_dof_layout(sys, BoundarySpec::no_penetration(s.dim))),
        as(sys, L, s.interface_model()),
        prm(s.scheme_params()) {}
};

Scenario hydrostatic() {
  Scenario sc;
  sc.elements = {8, 8, 1};
  sc.rho1 = sc.rho2 = 2.0;
  sc.mu1 = sc.mu2 = 0.1;
  sc.gravity = 9.81;
  sc.dt = 0.01;
  sc.droplets = {Droplet{{0.5, 0.5, 0.0}, 0.2}};
  return sc;
}

}  // namespace

TEST_CASE("stokes limit converges in one iteration") {
  Problem p(hydrostatic());
  const State prev = initialize(p.sc, p.as, p.prm);
  State next = prev;
  double mult = 0.0;
  LinearSolver lin;
  const SolveReport rep = solve_step(p.as, prev, next, mult, p.prm, NewtonConfig{}, lin);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.final_norm <= std::max(1e-8 * rep.initial_norm, 1e-11));
}

TEST_CASE("exact guess converges without iterating") {
  Problem p(hydrostatic());
  const State prev = initialize(p.sc, p.as, p.prm);
  State next = prev;
  double mult = 0.0;
  LinearSolver lin;
  solve_step(p.as, prev, next, mult, p.prm, NewtonConfig{}, lin);
  State again = next;
  double m2 = mult;
  const SolveReport rep = solve_step(p.as, prev, again, m2, p.prm, NewtonConfig{}, lin);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 1);
}

TEST_CASE("static droplet step converges superlinearly") {
  RunConfig c = preset_config("static-droplet-20");
  Problem p(c.scenario);
  const State prev = initialize(p.sc, p.as, p.prm);
  State next = prev;
  double mult = 0.0;
  LinearSolver lin;
  NewtonConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-13;
  const SolveReport rep = solve_step(p.as, prev, next, mult, p.prm, cfg, lin);
  MESSAGE("static droplet newton iterations: " << rep.iterations);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 8);
  REQUIRE(rep.step_history.size() >= 2);
  const std::size_t k = rep.step_history.size() - 1;
  CHECK(rep.step_history[k] <= 10.0 * std::pow(rep.step_history[k - 1], 1.5));
  CHECK(rep.final_norm <= std::max(cfg.rel_tol * rep.initial_norm, cfg.abs_tol));
}

TEST_CASE("jacobian reuse reaches the same tolerance") {
  RunConfig c = preset_config("static-droplet-20");
  Problem p(c.scenario);
  const State prev = initialize(p.sc, p.as, p.prm);
  NewtonConfig cfg;
  cfg.reuse_jacobian = true;
  LinearSolver lin;
  State s = prev;
  double mult = 0.0;
  int factorizations = 0;
  for (int step = 0; step < 3; ++step) {
    State next = s;
    const SolveReport rep = solve_step(p.as, s, next, mult, p.prm, cfg, lin);
    CHECK(rep.converged);
    factorizations += rep.factorizations;
    s = next;
  }
  CHECK(factorizations < 3);
}

TEST_CASE("iteration limit yields an unconverged report") {
  RunConfig c = preset_config("static-droplet-20");
  Problem p(c.scenario);
  const State prev = initialize(p.sc, p.as, p.prm);
  State next = prev;
  double mult = 0.0;
  NewtonConfig cfg;
  cfg.max_iter = 1;
  cfg.rel_tol = 1e-15;
  cfg.abs_tol = 0.0;
  LinearSolver lin;
  const SolveReport rep = solve_step(p.as, prev, next, mult, p.prm, cfg, lin);
  CHECK_FALSE(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.residual_history.size() == 2);
  CHECK_FALSE(rep.message.empty());
}
