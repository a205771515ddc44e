#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "entrolevel/discrete_system.hpp"

namespace entrolevel {

struct PropertyResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double limit = 0.0;
  std::string detail;
};

// One-sided values of orders 0..3 agree exactly at every breakpoint.
PropertyResult check_heaviside_continuity();
// Gauss integration of delta_eps over its support, several widths.
PropertyResult check_dirac_unit_area(double tol = 1e-12);
// secant * jump == jump of the function, relative to the function's range.
PropertyResult check_density_chain_rule(std::size_t pairs = 100000, std::uint64_t seed = 1, double tol = 1e-12);
PropertyResult check_dirac_chain_rule(std::size_t pairs = 100000, std::uint64_t seed = 2, double tol = 1e-12);
// [[ab]] = avg(a)[[b]] + avg(b)[[a]] and the kinetic-energy split of [[rho u]].
PropertyResult check_midpoint_product_rule(std::size_t samples = 100000, std::uint64_t seed = 3);

struct AltIdentityStudy {
  std::vector<int> meshes;
  std::vector<double> defects;
  std::vector<double> ratios;
};
// Quadrature defect of the alternative surface-tension form at a fixed width.
AltIdentityStudy alt_identity_study(const std::vector<int>& meshes, double eps, int quad_points);
PropertyResult check_alt_identity(double min_ratio = 3.5);

struct JacobianCheck {
  double max_rel_error = 0.0;
  int directions = 0;
};
JacobianCheck jacobian_fd_study(int n, int directions, double step, Scheme scheme, std::uint64_t seed = 4);
PropertyResult check_jacobian(Scheme scheme, double tol = 1e-6, int n = 40, int directions = 20);

std::vector<PropertyResult> run_property_suite();

}  // namespace entrolevel
