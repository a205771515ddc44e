#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "entrolevel/discrete_system.hpp"

namespace entrolevel {

struct EnergyRecord {
  double t = 0.0;
  double E_K = 0.0;
  double E_G = 0.0;
  double E_S = 0.0;
  double E_total = 0.0;
  double visc_diss = 0.0;
  double dc_diss = 0.0;
  double defect = 0.0;
  double max_div = 0.0;
  double max_speed = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
  // not part of the CSV row
  long step = 0;
  double dt = 0.0;
};

// All fields of a state at one parametric point of an element.
struct FieldSample {
  std::array<double, 3> x{};
  std::array<double, 3> u{};
  std::array<std::array<double, 3>, 3> grad_u{};  // grad_u[i][j] = d_j u_i
  double p = 0.0;
  double phi = 0.0;
  std::array<double, 3> grad_phi{};
  double v = 0.0;
};

FieldSample sample_fields(const SplineSystem& sys, const DofLayout& L, const State& s, int e,
                          const std::array<double, 3>& xi);
// Sample at a physical point; the element is located by search.
FieldSample sample_at(const SplineSystem& sys, const DofLayout& L, const State& s, const std::array<double, 3>& x);

// Kinetic, gravitational and surface energies; t and extrema fields also filled.
EnergyRecord energies(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m,
                      const DimensionlessGroups& g, int quad_points = 0);

struct DissipationCheck {
  double E_prev = 0.0;
  double E_next = 0.0;
  double lhs = 0.0;  // energy difference quotient
  double rhs = 0.0;  // minus the dissipation rates
  double viscous = 0.0;
  double dc = 0.0;
  double defect = 0.0;  // lhs - rhs
  // Structural error terms of the standard midpoint rule; zero otherwise.
  std::array<double, 5> midpoint_terms{};
  double midpoint_total() const;
};

DissipationCheck dissipation_identity(const Assembler& as, const State& prev, const State& next,
                                      const SchemeParams& prm);

struct FieldExtrema {
  double max_speed = 0.0;
  double max_v = 0.0;
  double min_v = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
  double max_div = 0.0;
};

FieldExtrema field_extrema(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m);

// 2 sqrt(pi A) / P with a sign-tested area and the regularised perimeter; 2D only.
double circularity(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m,
                   int area_points = 8);

struct Segment {
  std::array<double, 3> a{};
  std::array<double, 3> b{};
  int samples = 401;
};

// Mean pressure where phi > 2 eps minus mean pressure where phi < -2 eps. When
// either side has no such samples the band edge eps is used instead; factor
// receives the multiple of eps that was applied.
double plateau_jump(const std::vector<double>& phi, const std::vector<double>& p, double eps,
                    double* factor = nullptr);
double pressure_jump(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m,
                     const Segment& seg, double* factor = nullptr);

void write_energy_header(std::ostream& os);
void write_energy_row(std::ostream& os, const EnergyRecord& r);
std::vector<EnergyRecord> read_energy_csv(const std::string& path);

}  // namespace entrolevel
