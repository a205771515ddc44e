#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "entrolevel/dual.hpp"

namespace entrolevel {

// Regularised interface: width, norm regulariser, and two-phase material data.
// Phase 1 occupies phi > 0.
struct InterfaceModel {
  double eps = 0.1;
  double eps_norm = 1e-8;
  double rho1 = 1.0;
  double rho2 = 1.0;
  double mu1 = 0.0;
  double mu2 = 0.0;

  double rho_jump() const { return rho1 - rho2; }
  double mu_jump() const { return mu1 - mu2; }
  // throws std::invalid_argument
  void validate() const;
};

// Reynolds, Weber and inverse squared Froude numbers.
struct DimensionlessGroups {
  double reynolds = 1.0;
  double weber = std::numeric_limits<double>::infinity();
  double inv_froude_sq = 0.0;

  double inv_re() const { return 1.0 / reynolds; }
  double inv_we() const { return std::isinf(weber) ? 0.0 : 1.0 / weber; }
  bool surface_tension_active() const { return inv_we() > 0.0; }
  void validate() const;

  // Unit reference scales: We = 1/sigma, Re = 1, Fr^-2 = g.
  static DimensionlessGroups from_physical(double sigma, double gravity);
};

enum class HeavisidePiece { below = 0, left = 1, right = 2, above = 3 };

// Pieces are (-inf,-1), [-1,0), [0,1), [1,inf) in the scaled variable.
inline HeavisidePiece heaviside_piece(double x) {
  if (x < -1.0) return HeavisidePiece::below;
  if (x < 0.0) return HeavisidePiece::left;
  if (x < 1.0) return HeavisidePiece::right;
  return HeavisidePiece::above;
}

// Derivative of order 0..5 of one polynomial piece of the scaled quintic,
// evaluated at any x; one-sided limits at breakpoints use this directly.
template <class S>
S heaviside_piece_deriv(HeavisidePiece piece, const S& x, int order) {
  if (piece == HeavisidePiece::below) return S(0.0);
  if (piece == HeavisidePiece::above) return S(order == 0 ? 1.0 : 0.0);
  if (order > 5) return S(0.0);
  if (piece == HeavisidePiece::right) {
    const S a = 1.0 - x;
    switch (order) {
      case 0: {
        const S a2 = a * a;
        return 1.0 - a2 * a2 * (0.5 + 0.75 * x);
      }
      case 1: return 1.25 * a * a * a * (1.0 + 3.0 * x);
      case 2: return -15.0 * x * a * a;
      case 3: return -15.0 * a * (1.0 - 3.0 * x);
      case 4: return 60.0 - 90.0 * x;
      default: return S(-90.0);
    }
  }
  const S a = 1.0 + x;
  switch (order) {
    case 0: {
      const S a2 = a * a;
      return a2 * a2 * (0.5 - 0.75 * x);
    }
    case 1: return 1.25 * a * a * a * (1.0 - 3.0 * x);
    case 2: return -15.0 * x * a * a;
    case 3: return -15.0 * a * (1.0 + 3.0 * x);
    case 4: return -60.0 - 90.0 * x;
    default: return S(-90.0);
  }
}

// Quintic Heaviside in the scaled variable x = phi / eps.
template <class S>
S heaviside_scaled(const S& x) {
  return heaviside_piece_deriv(heaviside_piece(value_of(x)), x, 0);
}

// Derivative of order 1..5 of the scaled quintic; zero above order 5.
template <class S>
S heaviside_scaled_deriv(const S& x, int order) {
  return heaviside_piece_deriv(heaviside_piece(value_of(x)), x, order < 0 ? 0 : order);
}

// H_eps and its derivatives in phi.
template <class S>
S heaviside(const S& phi, double eps) {
  return heaviside_scaled(S(phi / eps));
}

template <class S>
S heaviside_deriv(const S& phi, double eps, int order) {
  if (order <= 0) return heaviside(phi, eps);
  return heaviside_scaled_deriv(S(phi / eps), order) * (1.0 / std::pow(eps, order));
}

// delta_eps^(k) = H_eps^(k+1)
template <class S>
S dirac(const S& phi, double eps, int order = 0) {
  return heaviside_deriv(phi, eps, order + 1);
}

template <class S>
S density(const S& phi, const InterfaceModel& m) {
  return m.rho2 + m.rho_jump() * heaviside(phi, m.eps);
}

template <class S>
S viscosity(const S& phi, const InterfaceModel& m) {
  return m.mu2 + m.mu_jump() * heaviside(phi, m.eps);
}

// Derivative of density with respect to phi.
template <class S>
S density_prime(const S& phi, const InterfaceModel& m) {
  return m.rho_jump() * heaviside_deriv(phi, m.eps, 1);
}

// sqrt(|b|^2 + e^2)
template <class S, std::size_t D>
S reg_norm(const std::array<S, D>& b, double e) {
  using std::sqrt;
  S s(e * e);
  for (std::size_t i = 0; i < D; ++i) fma_into(s, b[i], b[i]);
  return sqrt(s);
}

namespace detail {
inline constexpr double kTaylorSwitch = 1e-14;

inline bool use_taylor(double a, double b, double eps) {
  if (std::abs(b - a) < kTaylorSwitch * eps) return true;
  return heaviside_piece(a / eps) == heaviside_piece(b / eps);
}
}  // namespace detail

// Secant of density between two level-set values, in the time-averaged
// auxiliary equation. Exact Taylor form when both lie in one piece.
template <class S>
S rho_prime_aux(double phi_n, const S& phi_next, const InterfaceModel& m) {
  const double e = m.eps;
  const double b = value_of(phi_next);
  if (detail::use_taylor(phi_n, b, e)) {
    const S mid = 0.5 * (phi_next + phi_n);
    const S dl = phi_next - phi_n;
    const S dl2 = dl * dl;
    return m.rho_jump() * (heaviside_deriv(mid, e, 1) + heaviside_deriv(mid, e, 3) * dl2 * (1.0 / 24.0) +
                           heaviside_deriv(mid, e, 5) * dl2 * dl2 * (1.0 / 1920.0));
  }
  return (density(phi_next, m) - density(S(phi_n), m)) / (phi_next - phi_n);
}

// Secant of delta between two level-set values.
template <class S>
S dirac_prime_aux(double phi_n, const S& phi_next, double eps) {
  const double b = value_of(phi_next);
  if (detail::use_taylor(phi_n, b, eps)) {
    const S mid = 0.5 * (phi_next + phi_n);
    const S dl = phi_next - phi_n;
    return dirac(mid, eps, 1) + dirac(mid, eps, 3) * dl * dl * (1.0 / 24.0);
  }
  return (dirac(phi_next, eps) - dirac(S(phi_n), eps)) / (phi_next - phi_n);
}

// Density derivative at the midpoint value, used in the momentum equation.
template <class S>
S rho_prime_mom(const S& phi_mid, const InterfaceModel& m) {
  return density_prime(phi_mid, m);
}

// Unit normal, mean curvature and tangential projector of a level-set field.
template <class S, int D>
struct NormalCurvature {
  std::array<S, D> normal;
  S curvature;
  std::array<std::array<S, D>, D> tangent_projector;
};

// kappa = (trace(H) - n^T H n) / |grad|_e
template <class S, int D>
NormalCurvature<S, D> normal_curvature(const std::array<S, D>& grad, const std::array<std::array<S, D>, D>& hess,
                                       double e) {
  NormalCurvature<S, D> out;
  const S nrm = reg_norm(grad, e);
  const S inv = 1.0 / nrm;
  for (int i = 0; i < D; ++i) out.normal[i] = grad[i] * inv;
  S lap(0.0);
  for (int i = 0; i < D; ++i) lap += hess[i][i];
  S nhn(0.0);
  for (int i = 0; i < D; ++i) {
    S row(0.0);
    for (int j = 0; j < D; ++j) fma_into(row, hess[i][j], out.normal[j]);
    fma_into(nhn, out.normal[i], row);
  }
  out.curvature = (lap - nhn) * inv;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) out.tangent_projector[i][j] = (i == j ? 1.0 : 0.0) - out.normal[i] * out.normal[j];
  return out;
}

}  // namespace entrolevel
