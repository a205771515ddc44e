#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "entrolevel/interface_calculus.hpp"
#include "entrolevel/property_checks.hpp"

using namespace entrolevel;

namespace {

// Monomial coefficients c0..c5 of the two inner pieces.
constexpr std::array<double, 6> kLeft{0.5, 1.25, 0.0, -2.5, -2.5, -0.75};
constexpr std::array<double, 6> kRight{0.5, 1.25, 0.0, -2.5, 2.5, -0.75};

double poly_deriv(const std::array<double, 6>& c, double x, int k) {
  double s = 0.0;
  for (int j = k; j < 6; ++j) {
    double f = 1.0;
    for (int i = 0; i < k; ++i) f *= j - i;
    s += f * c[j] * std::pow(x, j - k);
  }
  return s;
}

double oracle(double x, int k) {
  if (x < -1.0) return 0.0;
  if (x >= 1.0) return k == 0 ? 1.0 : 0.0;
  return poly_deriv(x < 0.0 ? kLeft : kRight, x, k);
}

}  // namespace

TEST_CASE("heaviside matches the monomial form and its derivatives") {
  for (double x = -1.3; x <= 1.3; x += 0.0137)
    for (int k = 0; k <= 5; ++k) CHECK(heaviside_scaled_deriv(x, k) == doctest::Approx(oracle(x, k)).epsilon(1e-12));
  CHECK(heaviside_scaled(0.0) == 0.5);
  CHECK(heaviside_scaled(-1.0) == 0.0);
  CHECK(heaviside_scaled(1.0) == 1.0);
  CHECK(heaviside_scaled(-7.0) == 0.0);
  CHECK(heaviside_scaled(7.0) == 1.0);
}

TEST_CASE("heaviside symmetry and scaling") {
  for (double x = -1.2; x <= 1.2; x += 0.05) CHECK(heaviside_scaled(x) + heaviside_scaled(-x) == doctest::Approx(1.0));
  const double eps = 0.3;
  CHECK(heaviside_deriv(0.1, eps, 2) == doctest::Approx(oracle(0.1 / eps, 2) / (eps * eps)));
  CHECK(dirac(0.0, eps) == doctest::Approx(1.25 / eps));
  CHECK(dirac(0.05, eps, 1) == doctest::Approx(oracle(0.05 / eps, 2) / (eps * eps)));
}

TEST_CASE("one-sided limits agree through order three and order four jumps") {
  for (double b : {-1.0, 0.0, 1.0}) {
    const HeavisidePiece lo = heaviside_piece(b - 0.5), hi = heaviside_piece(b + 0.5);
    for (int k = 0; k <= 3; ++k) CHECK(heaviside_piece_deriv(lo, b, k) == heaviside_piece_deriv(hi, b, k));
  }
  CHECK(heaviside_piece_deriv(HeavisidePiece::left, 0.0, 4) != heaviside_piece_deriv(HeavisidePiece::right, 0.0, 4));
}

TEST_CASE("density and viscosity bounds") {
  InterfaceModel m;
  m.eps = 0.2;
  m.rho1 = 1.0;
  m.rho2 = 0.1;
  m.mu1 = 2.0;
  m.mu2 = 0.5;
  CHECK(density(1.0, m) == 1.0);
  CHECK(density(-1.0, m) == 0.1);
  CHECK(density(0.0, m) == doctest::Approx(0.55));
  CHECK(viscosity(0.0, m) == doctest::Approx(1.25));
  for (double p = -0.5; p <= 0.5; p += 0.01) {
    CHECK(density(p, m) >= 0.1);
    CHECK(density(p, m) <= 1.0);
  }
  InterfaceModel bad = m;
  bad.eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = m;
  bad.rho2 = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("density secant is the exact difference quotient") {
  InterfaceModel m;
  m.eps = 0.1;
  m.rho1 = 1000.0;
  m.rho2 = 1.0;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng);
    const double q = rho_prime_aux(a, b, m);
    CHECK(std::abs(q * (b - a) - (density(b, m) - density(a, m))) <= 1e-12 * 1000.0);
  }
  // both in one piece: Taylor form is the secant exactly
  const double a = 0.012, b = 0.047;
  CHECK(rho_prime_aux(a, b, m) == doctest::Approx((density(b, m) - density(a, m)) / (b - a)).epsilon(1e-13));
  CHECK(rho_prime_aux(0.03, 0.03, m) == doctest::Approx(density_prime(0.03, m)));
}

TEST_CASE("dirac secant is the exact difference quotient") {
  const double eps = 0.05;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(std::abs(dirac_prime_aux(a, b, eps) * (b - a) - (dirac(b, eps) - dirac(a, eps))) <= 1e-12 * 1.25 / eps);
  }
  CHECK(dirac_prime_aux(-0.01, -0.01, eps) == doctest::Approx(dirac(-0.01, eps, 1)));
}

TEST_CASE("secant derivative through dual numbers") {
  InterfaceModel m;
  m.eps = 0.1;
  m.rho1 = 3.0;
  m.rho2 = 1.0;
  using D1 = Dual<1>;
  const double a = 0.02, b = 0.06, h = 1e-6;
  D1 x(b);
  x.d[0] = 1.0;
  const D1 q = rho_prime_aux(a, x, m);
  const double fd = (rho_prime_aux(a, b + h, m) - rho_prime_aux(a, b - h, m)) / (2 * h);
  CHECK(q.d[0] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("normal and curvature of a circle") {
  // phi = r - |x| sampled at radius s: grad = -x/s, hess = -(I - x x^T / s^2) / s
  const double s = 0.7;
  const std::array<double, 2> x{s * std::cos(0.3), s * std::sin(0.3)};
  std::array<double, 2> g{-x[0] / s, -x[1] / s};
  std::array<std::array<double, 2>, 2> H{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) H[i][j] = -((i == j ? 1.0 : 0.0) - x[i] * x[j] / (s * s)) / s;
  const auto nc = normal_curvature<double, 2>(g, H, 0.0);
  CHECK(nc.curvature == doctest::Approx(-1.0 / s));
  CHECK(nc.normal[0] == doctest::Approx(-std::cos(0.3)));
  double tn = 0.0;
  for (int j = 0; j < 2; ++j) tn += nc.tangent_projector[0][j] * nc.normal[j];
  CHECK(tn == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("dimensionless groups from physical data") {
  const auto g = DimensionlessGroups::from_physical(73.0, 0.0);
  CHECK(g.weber == doctest::Approx(1.0 / 73.0));
  CHECK(g.inv_we() == doctest::Approx(73.0));
  CHECK(g.reynolds == 1.0);
  const auto off = DimensionlessGroups::from_physical(0.0, 9.81);
  CHECK_FALSE(off.surface_tension_active());
  CHECK(off.inv_froude_sq == doctest::Approx(9.81));
}

TEST_CASE("property suite scalar checks") {
  CHECK(check_heaviside_continuity().pass);
  CHECK(check_dirac_unit_area().pass);
  CHECK(check_density_chain_rule(20000).pass);
  CHECK(check_dirac_chain_rule(20000).pass);
  CHECK(check_midpoint_product_rule(20000).pass);
}
