#include "entrolevel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace entrolevel {

FieldSample sample_fields(const SplineSystem& sys, const DofLayout& L, const State& s, int e,
                          const std::array<double, 3>& xi) {
  const int D = sys.dim();
  FieldSample f;
  f.x = sys.to_physical(xi);
  for (int k = 0; k < D; ++k) {
    const BasisEval b = sys.eval_basis(velocity_space(k), e, xi);
    const double* c = s.block(L, Block::velocity, k);
    for (int l = 0; l < b.size(); ++l) {
      const double a = c[b.global[l]];
      f.u[k] += a * b.value[l];
      for (int j = 0; j < D; ++j) f.grad_u[k][j] += a * b.grad[l * D + j];
    }
  }
  const BasisEval b = sys.eval_basis(SpaceId::levelset, e, xi);
  const double* cp = s.block(L, Block::pressure);
  const double* cf = s.block(L, Block::levelset);
  const double* cv = s.block(L, Block::aux);
  for (int l = 0; l < b.size(); ++l) {
    const int g = b.global[l];
    f.p += cp[g] * b.value[l];
    f.phi += cf[g] * b.value[l];
    f.v += cv[g] * b.value[l];
    for (int j = 0; j < D; ++j) f.grad_phi[j] += cf[g] * b.grad[l * D + j];
  }
  return f;
}

FieldSample sample_at(const SplineSystem& sys, const DofLayout& L, const State& s, const std::array<double, 3>& x) {
  const auto xi = sys.to_parametric(x);
  std::array<int, 3> m{0, 0, 0};
  for (int d = 0; d < sys.dim(); ++d) m[d] = sys.scalar_space().dir(d).find_element(xi[d]);
  return sample_fields(sys, L, s, sys.element_flat(m), xi);
}

namespace {

double grad_norm(const FieldSample& f, int D, double e) {
  double s = e * e;
  for (int j = 0; j < D; ++j) s += f.grad_phi[j] * f.grad_phi[j];
  return std::sqrt(s);
}

}  // namespace

EnergyRecord energies(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m,
                      const DimensionlessGroups& g, int nq) {
  if (nq <= 0) nq = sys.quad_points();
  const int D = sys.dim();
  EnergyRecord r;
  r.t = s.t;
  r.step = s.step;
  r.rho_min = std::numeric_limits<double>::infinity();
  r.rho_max = -std::numeric_limits<double>::infinity();
  const double we = g.inv_we();
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, nq);
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const FieldSample f = sample_fields(sys, L, s, e, q.xi[k]);
      const double rho = density(f.phi, m);
      double u2 = 0.0, div = 0.0;
      for (int j = 0; j < D; ++j) {
        u2 += f.u[j] * f.u[j];
        div += f.grad_u[j][j];
      }
      r.E_K += q.weight[k] * 0.5 * rho * u2;
      r.E_G += q.weight[k] * g.inv_froude_sq * rho * f.x[D - 1];
      if (we > 0.0) r.E_S += q.weight[k] * we * dirac(f.phi, m.eps) * grad_norm(f, D, m.eps_norm);
      r.rho_min = std::min(r.rho_min, rho);
      r.rho_max = std::max(r.rho_max, rho);
      r.max_speed = std::max(r.max_speed, std::sqrt(u2));
      r.max_div = std::max(r.max_div, std::abs(div));
    }
  }
  r.E_total = r.E_K + r.E_G + r.E_S;
  return r;
}

double DissipationCheck::midpoint_total() const {
  double s = 0.0;
  for (double t : midpoint_terms) s += t;
  return s;
}

DissipationCheck dissipation_identity(const Assembler& as, const State& prev, const State& next,
                                      const SchemeParams& prm) {
  const SplineSystem& sys = as.system();
  const DofLayout& L = as.layout();
  const InterfaceModel& m = as.model();
  const int D = sys.dim();
  const double dt = prm.dt;
  const double we = prm.groups.inv_we();
  const double two_re = 2.0 * prm.groups.inv_re();
  const double en2 = m.eps_norm * m.eps_norm;
  DissipationCheck out;
  out.E_prev = energies(sys, L, prev, m, prm.groups).E_total;
  out.E_next = energies(sys, L, next, m, prm.groups).E_total;
  const bool midpoint = prm.scheme == Scheme::standard_midpoint;
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, sys.quad_points());
    double grad2 = 0.0;
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const FieldSample a = sample_fields(sys, L, prev, e, q.xi[k]);
      const FieldSample b = sample_fields(sys, L, next, e, q.xi[k]);
      const double w = q.weight[k];
      const double phim = 0.5 * (a.phi + b.phi);
      double sym2 = 0.0, g2 = 0.0;
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
          const double gij = 0.5 * (a.grad_u[i][j] + b.grad_u[i][j]);
          const double gji = 0.5 * (a.grad_u[j][i] + b.grad_u[j][i]);
          const double sij = 0.5 * (gij + gji);
          sym2 += sij * sij;
          g2 += gij * gij;
        }
      out.viscous += w * two_re * viscosity(phim, m) * sym2;
      grad2 += w * g2;
      if (midpoint) {
        double du2 = 0.0;
        for (int i = 0; i < D; ++i) du2 += (b.u[i] - a.u[i]) * (b.u[i] - a.u[i]);
        const double drho = density(b.phi, m) - density(a.phi, m);
        out.midpoint_terms[0] += w * 0.125 * du2 * drho / dt;
        if (we > 0.0) {
          FieldSample mid = a;
          for (int j = 0; j < D; ++j) mid.grad_phi[j] = 0.5 * (a.grad_phi[j] + b.grad_phi[j]);
          const double nm = grad_norm(mid, D, m.eps_norm);
          const double na = grad_norm(a, D, m.eps_norm), nb = grad_norm(b, D, m.eps_norm);
          const double navg = 0.5 * (na + nb);
          const double dd = dirac(b.phi, m.eps) - dirac(a.phi, m.eps);
          const double davg = 0.5 * (dirac(b.phi, m.eps) + dirac(a.phi, m.eps));
          const double dphi = b.phi - a.phi;
          const double dpm = dirac(phim, m.eps, 1);
          const double c = we / dt;
          out.midpoint_terms[1] += -w * c * dd * (nm - navg);
          out.midpoint_terms[2] += -w * c * (nb - na) * (dirac(phim, m.eps) * navg / nm - davg);
          out.midpoint_terms[3] += w * c * (dd - dphi * dpm) * nm;
          out.midpoint_terms[4] += w * c * dpm * dphi * en2 / nm;
        }
      }
    }
    if (prm.dc_constant > 0.0) out.dc += as.theta_dc(e, prev, next, prm) * grad2;
  }
  out.lhs = (out.E_next - out.E_prev) / dt;
  out.rhs = -(out.viscous + out.dc);
  out.defect = out.lhs - out.rhs;
  return out;
}

FieldExtrema field_extrema(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m) {
  const int D = sys.dim();
  FieldExtrema x;
  x.rho_min = std::numeric_limits<double>::infinity();
  x.rho_max = -std::numeric_limits<double>::infinity();
  x.max_v = -std::numeric_limits<double>::infinity();
  x.min_v = std::numeric_limits<double>::infinity();
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto q = element_quadrature(sys, e, sys.quad_points());
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const FieldSample f = sample_fields(sys, L, s, e, q.xi[k]);
      double u2 = 0.0, div = 0.0;
      for (int j = 0; j < D; ++j) {
        u2 += f.u[j] * f.u[j];
        div += f.grad_u[j][j];
      }
      const double rho = density(f.phi, m);
      x.max_speed = std::max(x.max_speed, std::sqrt(u2));
      x.max_div = std::max(x.max_div, std::abs(div));
      x.max_v = std::max(x.max_v, f.v);
      x.min_v = std::min(x.min_v, f.v);
      x.rho_min = std::min(x.rho_min, rho);
      x.rho_max = std::max(x.rho_max, rho);
    }
  }
  return x;
}

double circularity(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m,
                   int area_points) {
  if (sys.dim() != 2) throw std::invalid_argument("circularity is defined for two dimensions only");
  double area = 0.0, perim = 0.0;
  for (int e = 0; e < sys.n_elements(); ++e) {
    const auto qa = element_quadrature(sys, e, area_points);
    for (std::size_t k = 0; k < qa.xi.size(); ++k) {
      const FieldValue f = eval_field(sys, SpaceId::levelset, s.block(L, Block::levelset), e, qa.xi[k]);
      if (f.value > 0.0) area += qa.weight[k];
    }
    const auto q = element_quadrature(sys, e, sys.quad_points());
    for (std::size_t k = 0; k < q.xi.size(); ++k) {
      const FieldValue f = eval_field(sys, SpaceId::levelset, s.block(L, Block::levelset), e, q.xi[k]);
      const double n = std::sqrt(f.grad[0] * f.grad[0] + f.grad[1] * f.grad[1] + m.eps_norm * m.eps_norm);
      perim += q.weight[k] * dirac(f.value, m.eps) * n;
    }
  }
  if (!(perim > 0.0)) throw std::runtime_error("no interface present");
  return 2.0 * std::sqrt(std::numbers::pi * area) / perim;
}

double plateau_jump(const std::vector<double>& phi, const std::vector<double>& p, double eps, double* factor) {
  for (double f : {2.0, 1.0}) {
    double si = 0.0, so = 0.0;
    int ni = 0, no = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (phi[i] > f * eps) {
        si += p[i];
        ++ni;
      } else if (phi[i] < -f * eps) {
        so += p[i];
        ++no;
      }
    }
    if (ni > 0 && no > 0) {
      if (factor) *factor = f;
      return si / ni - so / no;
    }
  }
  throw std::invalid_argument("sampling segment does not cross the interface");
}

double pressure_jump(const SplineSystem& sys, const DofLayout& L, const State& s, const InterfaceModel& m,
                     const Segment& seg, double* factor) {
  if (seg.samples < 2) throw std::invalid_argument("need at least two samples");
  std::vector<double> phi, p;
  for (int i = 0; i < seg.samples; ++i) {
    const double t = static_cast<double>(i) / (seg.samples - 1);
    std::array<double, 3> x{};
    for (int d = 0; d < 3; ++d) x[d] = seg.a[d] + t * (seg.b[d] - seg.a[d]);
    const FieldSample f = sample_at(sys, L, s, x);
    phi.push_back(f.phi);
    p.push_back(f.p);
  }
  return plateau_jump(phi, p, m.eps, factor);
}

void write_energy_header(std::ostream& os) {
  os << "t,E_K,E_G,E_S,E_total,visc_diss,dc_diss,defect,max_div,max_speed,rho_min,rho_max\n";
}

void write_energy_row(std::ostream& os, const EnergyRecord& r) {
  const double v[12] = {r.t,         r.E_K,     r.E_G,    r.E_S,     r.E_total,  r.visc_diss,
                        r.dc_diss,   r.defect,  r.max_div, r.max_speed, r.rho_min, r.rho_max};
  char buf[40];
  for (int i = 0; i < 12; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    os << buf << (i == 11 ? '\n' : ',');
  }
}

std::vector<EnergyRecord> read_energy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<EnergyRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    double v[12];
    for (int i = 0; i < 12; ++i) {
      std::string cell;
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("short energy row in " + path);
      v[i] = std::stod(cell);
    }
    EnergyRecord r;
    r.t = v[0];
    r.E_K = v[1];
    r.E_G = v[2];
    r.E_S = v[3];
    r.E_total = v[4];
    r.visc_diss = v[5];
    r.dc_diss = v[6];
    r.defect = v[7];
    r.max_div = v[8];
    r.max_speed = v[9];
    r.rho_min = v[10];
    r.rho_max = v[11];
    out.push_back(r);
  }
  return out;
}

}  // namespace entrolevel
