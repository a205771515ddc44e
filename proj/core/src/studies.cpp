#include "entrolevel/studies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>

namespace entrolevel {

double droplet_pressure_jump(const Scenario& sc, const State& s, double* factor) {
  SplineSystem sys(sc.dim, sc.elements, sc.box, sc.quad_points);
  const DofLayout L = build_dof_layout(sys, BoundarySpec::no_penetration(sc.dim));
  const Droplet& d = sc.droplets.at(0);
  Segment seg;
  seg.a = {sc.box.lo[0], d.center[1], d.center[2]};
  seg.b = {sc.box.hi[0], d.center[1], d.center[2]};
  seg.samples = 40 * sc.elements[0] + 1;
  return pressure_jump(sys, L, s, sc.interface_model(), seg, factor);
}

DropletRun run_static_droplet(const RunConfig& cfg, std::ostream* log) {
  DropletRun r;
  r.elements = cfg.scenario.elements[0];
  r.artifacts = run(cfg.scenario, cfg.newton, cfg.output, {}, log);
  const auto& E = r.artifacts.energy;
  r.surface_energy0 = E.front().E_S;
  for (const auto& rec : E)
    r.surface_drift = std::max(r.surface_drift, std::abs(rec.E_S - r.surface_energy0) / r.surface_energy0);
  r.max_v = -std::numeric_limits<double>::infinity();
  for (const auto& x : r.artifacts.extrema) r.max_v = std::max(r.max_v, x.max_v);
  r.jump = droplet_pressure_jump(cfg.scenario, r.artifacts.final_state, &r.plateau_factor);
  return r;
}

ConvergenceStudy static_droplet_convergence(const std::vector<int>& meshes, const RunConfig& base,
                                            std::ostream* log) {
  ConvergenceStudy st;
  for (int n : meshes) {
    RunConfig c = preset_config("static-droplet-" + std::to_string(n));
    c.newton = base.newton;
    c.output = base.output;
    c.output.dir = (std::filesystem::path(base.output.dir) / ("static-droplet-" + std::to_string(n))).string();
    c.scenario.scheme = base.scenario.scheme;
    if (log) *log << "mesh " << n << "x" << n << "\n";
    st.runs.push_back(run_static_droplet(c, log));
  }
  const std::size_t m = st.runs.size();
  if (m >= 3) {
    const double d1 = st.runs[m - 3].jump - st.runs[m - 2].jump;
    const double d2 = st.runs[m - 2].jump - st.runs[m - 1].jump;
    st.richardson_order = std::log2(std::abs(d1 / d2));
  }
  st.monotone = true;
  for (std::size_t i = 1; i < m; ++i) {
    const double e0 = std::abs(st.runs[i - 1].jump - kYoungLaplaceJump);
    const double e1 = std::abs(st.runs[i].jump - kYoungLaplaceJump);
    st.error_orders.push_back(std::log2(e0 / e1));
    if (!(e1 < e0)) st.monotone = false;
  }
  return st;
}

void write_convergence_table(std::ostream& os, const ConvergenceStudy& st) {
  char b[256];
  os << "mesh  jump        |jump-36.5|  E_S(0)       E_S drift   max v      plateau\n";
  for (const auto& r : st.runs) {
    std::snprintf(b, sizeof b, "%-5d %-11.6f %-12.4e %-12.6f %-11.3e %-10.4f |phi|>%g eps\n", r.elements, r.jump,
                  std::abs(r.jump - kYoungLaplaceJump), r.surface_energy0, r.surface_drift, r.max_v,
                  r.plateau_factor);
    os << b;
  }
  std::snprintf(b, sizeof b, "observed order (jump differences): %.3f\n", st.richardson_order);
  os << b;
  for (std::size_t i = 0; i < st.error_orders.size(); ++i) {
    std::snprintf(b, sizeof b, "observed order (error vs 36.5, %d->%d): %.3f\n", st.runs[i].elements,
                  st.runs[i + 1].elements, st.error_orders[i]);
    os << b;
  }
  os << "monotone approach: " << (st.monotone ? "yes" : "no") << "\n";
}

SchemeComparison compare_schemes(const RunConfig& cfg, std::ostream* log) {
  SchemeComparison c;
  RunConfig a = cfg, b = cfg;
  a.scenario.scheme = Scheme::entropy_stable;
  b.scenario.scheme = Scheme::standard_midpoint;
  a.output.dir = (std::filesystem::path(cfg.output.dir) / "entropy").string();
  b.output.dir = (std::filesystem::path(cfg.output.dir) / "midpoint").string();
  if (log) *log << "entropy-stable scheme\n";
  c.entropy = run(a.scenario, a.newton, a.output, {}, log);
  if (log) *log << "standard midpoint scheme\n";
  c.midpoint = run(b.scenario, b.newton, b.output, {}, log);
  const std::size_t n = std::min(c.entropy.checks.size(), c.midpoint.checks.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double es = std::abs(c.entropy.checks[i].defect);
    const double mp = std::abs(c.midpoint.checks[i].defect);
    const double r = es > 0.0 ? mp / es : std::numeric_limits<double>::infinity();
    c.ratio.push_back(r);
    if (r >= 10.0) ++hits;
  }
  c.fraction_10x = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  return c;
}

void write_defect_series(std::ostream& os, const SchemeComparison& c) {
  os << "step,t,defect_entropy,defect_midpoint,ratio,midpoint_error_terms\n";
  char b[256];
  for (std::size_t i = 0; i < c.ratio.size(); ++i) {
    std::snprintf(b, sizeof b, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i + 1, c.entropy.energy[i + 1].t,
                  c.entropy.checks[i].defect, c.midpoint.checks[i].defect, c.ratio[i],
                  c.midpoint.checks[i].midpoint_total());
    os << b;
  }
}

}  // namespace entrolevel
