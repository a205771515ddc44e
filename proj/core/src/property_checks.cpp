#include "entrolevel/property_checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "entrolevel/quadrature.hpp"
#include "entrolevel/simulation_driver.hpp"

namespace entrolevel {

namespace {

std::string sci(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3e", v);
  return b;
}

PropertyResult make(std::string name, double measured, double limit, bool pass, std::string detail = {}) {
  return {std::move(name), pass, measured, limit, std::move(detail)};
}

// Level-set pairs: broad samples over the band plus close pairs near breakpoints.
std::pair<double, double> random_pair(std::mt19937_64& rng, double eps) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_int_distribution<int> kind(0, 3);
  const double a = u(rng) * eps;
  switch (kind(rng)) {
    case 0:
      return {a, u(rng) * eps};
    case 1: {
      std::uniform_int_distribution<int> ex(2, 15);
      return {a, a + std::pow(10.0, -ex(rng)) * eps * (u(rng) > 0 ? 1.0 : -1.0)};
    }
    case 2: {
      std::uniform_int_distribution<int> bp(-1, 1);
      std::uniform_int_distribution<int> ex(3, 13);
      const double b0 = bp(rng) * eps;
      const double off = std::pow(10.0, -ex(rng)) * eps;
      return {b0 - off * std::abs(u(rng)), b0 + off * std::abs(u(rng))};
    }
    default:
      return {a, a};
  }
}

}  // namespace

PropertyResult check_heaviside_continuity() {
  const HeavisidePiece pieces[4] = {HeavisidePiece::below, HeavisidePiece::left, HeavisidePiece::right,
                                    HeavisidePiece::above};
  const double breaks[3] = {-1.0, 0.0, 1.0};
  double worst = 0.0;
  for (int b = 0; b < 3; ++b)
    for (int k = 0; k <= 3; ++k) {
      const double l = heaviside_piece_deriv(pieces[b], breaks[b], k);
      const double r = heaviside_piece_deriv(pieces[b + 1], breaks[b], k);
      worst = std::max(worst, std::abs(l - r));
    }
  // order 4 jumps at the origin, which is what bounds the smoothness at C3
  const double j4 = std::abs(heaviside_piece_deriv(HeavisidePiece::left, 0.0, 4) -
                             heaviside_piece_deriv(HeavisidePiece::right, 0.0, 4));
  return make("heaviside C3 continuity", worst, 0.0, worst == 0.0 && j4 > 0.0,
              "max one-sided mismatch " + sci(worst) + ", order-4 jump " + sci(j4));
}

PropertyResult check_dirac_unit_area(double tol) {
  const auto rule = gauss_legendre(6);
  double worst = 0.0;
  for (double eps : {1e-3, 0.0375, 0.1, 0.2, 1.0, 7.5}) {
    double area = 0.0;
    for (double lo : {-eps, 0.0}) {
      const double hi = lo + eps;
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double phi = lo + 0.5 * (rule.points[q] + 1.0) * (hi - lo);
        area += 0.5 * (hi - lo) * rule.weights[q] * dirac(phi, eps);
      }
    }
    worst = std::max(worst, std::abs(area - 1.0));
  }
  return make("dirac unit area", worst, tol, worst <= tol);
}

PropertyResult check_density_chain_rule(std::size_t pairs, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    InterfaceModel m;
    m.eps = std::pow(10.0, std::uniform_real_distribution<double>(-3.0, 0.5)(rng));
    m.rho1 = std::uniform_real_distribution<double>(0.1, 1000.0)(rng);
    m.rho2 = std::uniform_real_distribution<double>(0.1, 1000.0)(rng);
    const auto [a, b] = random_pair(rng, m.eps);
    const double lhs = rho_prime_aux(a, b, m) * (b - a);
    const double rhs = density(b, m) - density(a, m);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(m.rho1, m.rho2));
  }
  // equal arguments reduce to the derivative itself
  InterfaceModel m;
  m.eps = 0.1;
  m.rho1 = 3.0;
  const double same = std::abs(rho_prime_aux(0.03, 0.03, m) - density_prime(0.03, m)) / density_prime(0.03, m);
  worst = std::max(worst, same);
  return make("density secant chain rule", worst, tol, worst <= tol, std::to_string(pairs) + " pairs");
}

PropertyResult check_dirac_chain_rule(std::size_t pairs, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double eps = std::pow(10.0, std::uniform_real_distribution<double>(-3.0, 0.5)(rng));
    const auto [a, b] = random_pair(rng, eps);
    const double lhs = dirac_prime_aux(a, b, eps) * (b - a);
    const double rhs = dirac(b, eps) - dirac(a, eps);
    const double range = 1.25 / eps;
    worst = std::max(worst, std::abs(lhs - rhs) / range);
  }
  const double eps = 0.1;
  const double same = std::abs(dirac_prime_aux(0.02, 0.02, eps) - dirac(0.02, eps, 1)) / std::abs(dirac(0.02, eps, 1));
  worst = std::max(worst, same);
  return make("dirac secant chain rule", worst, tol, worst <= tol, std::to_string(pairs) + " pairs");
}

PropertyResult check_midpoint_product_rule(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  constexpr double kRound = 64.0 * std::numeric_limits<double>::epsilon();
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double a0 = u(rng), a1 = u(rng), b0 = u(rng), b1 = u(rng);
    const double lhs = a1 * b1 - a0 * b0;
    const double rhs = 0.5 * (a0 + a1) * (b1 - b0) + 0.5 * (b0 + b1) * (a1 - a0);
    const double scale = std::abs(a0 * b0) + std::abs(a1 * b1) + std::abs(a0 * b1) + std::abs(a1 * b0);
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
    // [[rho u]] . u_mid = [[rho |u|^2 / 2]] + [[rho]] (u_n . u_{n+1}) / 2
    const double r0 = std::abs(u(rng)) + 0.1, r1 = std::abs(u(rng)) + 0.1;
    const double v0[2] = {u(rng), u(rng)}, v1[2] = {u(rng), u(rng)};
    double l2 = 0.0, k0 = 0.0, k1 = 0.0, cross = 0.0, mag = 0.0;
    for (int d = 0; d < 2; ++d) {
      l2 += (r1 * v1[d] - r0 * v0[d]) * 0.5 * (v0[d] + v1[d]);
      k0 += v0[d] * v0[d];
      k1 += v1[d] * v1[d];
      cross += v0[d] * v1[d];
    }
    const double r2 = 0.5 * (r1 * k1 - r0 * k0) + 0.5 * (r1 - r0) * cross;
    mag = (r0 + r1) * (k0 + k1);
    worst = std::max(worst, std::abs(l2 - r2) / mag);
  }
  return make("midpoint product rule", worst, kRound, worst <= kRound, std::to_string(samples) + " samples");
}

AltIdentityStudy alt_identity_study(const std::vector<int>& meshes, double eps, int quad_points) {
  AltIdentityStudy st;
  st.meshes = meshes;
  Box box;
  box.lo = {0.0, 0.0, 0.0};
  box.hi = {1.0, 1.0, 1.0};
  const double pi = std::acos(-1.0);
  for (int n : meshes) {
    SplineSystem sys(2, {n, n, 1}, box);
    const auto phi = project_l2(sys, SpaceId::levelset, [](const std::array<double, 3>& x) {
      return 0.3 - std::hypot(x[0] - 0.52, x[1] - 0.47);
    });
    // Not solenoidal: for a circular interface a divergence-free field makes both sides vanish.
    std::array<Eigen::VectorXd, 3> w;
    w[0] = project_l2(sys, velocity_space(0), [pi](const std::array<double, 3>& x) {
      return std::sin(pi * x[0]) * std::cos(2.0 * x[1]) + x[1];
    });
    w[1] = project_l2(sys, velocity_space(1), [pi](const std::array<double, 3>& x) {
      return std::cos(pi * x[0] * x[1]) - 0.5 * x[0];
    });
    const AltIdentity id = surface_tension_alt_identity_check(sys, phi, w, eps, 1e-8, quad_points);
    st.defects.push_back(id.defect() / std::max(std::abs(id.lhs), 1e-300));
  }
  for (std::size_t i = 1; i < st.defects.size(); ++i) st.ratios.push_back(st.defects[i - 1] / st.defects[i]);
  return st;
}

PropertyResult check_alt_identity(double min_ratio) {
  const AltIdentityStudy st = alt_identity_study({20, 40, 80}, 0.1, 0);
  double worst = std::numeric_limits<double>::infinity();
  for (double r : st.ratios) worst = std::min(worst, r);
  std::string detail = "relative defects";
  for (double d : st.defects) detail += " " + sci(d);
  return make("alternative surface-tension identity", worst, min_ratio, worst >= min_ratio, detail);
}

JacobianCheck jacobian_fd_study(int n, int directions, double step, Scheme scheme, std::uint64_t seed) {
  Scenario sc;
  sc.dim = 2;
  sc.elements = {n, n, 1};
  sc.box.lo = {0.0, 0.0, 0.0};
  sc.box.hi = {1.0, 1.0, 1.0};
  sc.rho1 = 10.0;
  sc.rho2 = 1.0;
  sc.mu1 = 0.5;
  sc.mu2 = 0.05;
  sc.sigma = 0.2;
  sc.gravity = 1.0;
  sc.dt = 0.02;
  sc.dt_limit = DtLimit::off;
  sc.dc_constant = 0.4;
  sc.scheme = scheme;
  sc.droplets = {Droplet{{0.5, 0.45, 0.0}, 0.25}};
  SplineSystem sys(sc.dim, sc.elements, sc.box);
  const DofLayout L = build_dof_layout(sys, BoundarySpec::no_penetration(sc.dim));
  Assembler as(sys, L, sc.interface_model());
  const SchemeParams prm = sc.scheme_params();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  State prev = initialize(sc, as, prm);
  double m0 = 0.0;
  Eigen::VectorXd kick(as.n_reduced());
  for (auto& k : kick) k = 0.05 * u(rng);
  as.add_reduced(prev, m0, kick, 1.0);
  State next = prev;
  double mult = 0.1;
  for (auto& k : kick) k = 0.05 * u(rng);
  as.add_reduced(next, mult, kick, 1.0);

  SparseMatrix J;
  as.jacobian(prev, next, mult, prm, J);
  JacobianCheck out;
  out.directions = directions;
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd d(as.n_reduced());
    for (auto& x : d) x = u(rng);
    State sp = next, sm = next;
    double mp = mult, mm = mult;
    as.add_reduced(sp, mp, d, step);
    as.add_reduced(sm, mm, d, -step);
    const Eigen::VectorXd fd = (as.residual(prev, sp, mp, prm) - as.residual(prev, sm, mm, prm)) / (2.0 * step);
    const Eigen::VectorXd jd = J * d;
    out.max_rel_error = std::max(out.max_rel_error, (fd - jd).norm() / jd.norm());
  }
  return out;
}

PropertyResult check_jacobian(Scheme scheme, double tol, int n, int directions) {
  const JacobianCheck c = jacobian_fd_study(n, directions, 1e-7, scheme);
  const std::string which = scheme == Scheme::entropy_stable ? "entropy-stable" : "standard-midpoint";
  return make("jacobian finite-difference check (" + which + ")", c.max_rel_error, tol, c.max_rel_error <= tol,
              std::to_string(n) + "x" + std::to_string(n) + ", " + std::to_string(c.directions) + " directions");
}

std::vector<PropertyResult> run_property_suite() {
  return {check_heaviside_continuity(),
          check_dirac_unit_area(),
          check_density_chain_rule(),
          check_dirac_chain_rule(),
          check_midpoint_product_rule(),
          check_alt_identity(),
          check_jacobian(Scheme::entropy_stable),
          check_jacobian(Scheme::standard_midpoint)};
}

}  // namespace entrolevel
