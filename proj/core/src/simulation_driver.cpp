#include "entrolevel/simulation_driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace entrolevel {

namespace {

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

}  // namespace

double Scenario::element_diagonal() const {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double h = (box.hi[d] - box.lo[d]) / elements[d];
    s += h * h;
  }
  return std::sqrt(s);
}

InterfaceModel Scenario::interface_model() const {
  InterfaceModel m;
  m.eps = eps_factor * element_diagonal();
  m.eps_norm = eps_norm;
  m.rho1 = rho1;
  m.rho2 = rho2;
  m.mu1 = mu1;
  m.mu2 = mu2;
  return m;
}

DimensionlessGroups Scenario::groups() const { return DimensionlessGroups::from_physical(sigma, gravity); }

SchemeParams Scenario::scheme_params() const {
  SchemeParams p;
  p.dt = dt;
  p.groups = groups();
  p.scheme = scheme;
  p.dc_constant = dc_constant;
  p.dc_eps = dc_eps;
  p.supg = supg;
  return p;
}

void Scenario::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument(key + ": " + why);
  };
  if (dim != 2 && dim != 3) bad("mesh.dim", "must be 2 or 3");
  for (int d = 0; d < dim; ++d) {
    if (elements[d] < 1) bad(std::string("mesh.n") + "xyz"[d], "must be positive");
    if (!(box.hi[d] > box.lo[d])) bad(std::string("mesh.") + "xyz"[d] + "1", "box extent must be positive");
  }
  if (!(rho1 > 0.0)) bad("materials.rho1", "must be positive");
  if (!(rho2 > 0.0)) bad("materials.rho2", "must be positive");
  if (!(mu1 >= 0.0)) bad("materials.mu1", "must be non-negative");
  if (!(mu2 >= 0.0)) bad("materials.mu2", "must be non-negative");
  if (!(sigma >= 0.0)) bad("physics.sigma", "must be non-negative");
  if (!(gravity >= 0.0)) bad("physics.gravity", "must be non-negative");
  if (!(eps_factor > 0.0)) bad("interface.eps_factor", "must be positive");
  if (!(eps_norm >= 0.0)) bad("interface.eps_norm", "must be non-negative");
  if (!(dt > 0.0)) bad("time.dt", "must be positive");
  if (!(t_end >= 0.0)) bad("time.end", "must be non-negative");
  if (!(dc_constant >= 0.0)) bad("stabilization.dc_constant", "must be non-negative");
  if (!(dc_eps > 0.0)) bad("stabilization.dc_eps", "must be positive");
  if (droplets.empty()) bad("init.droplets", "at least one droplet is required");
  for (std::size_t i = 0; i < droplets.size(); ++i) {
    const auto& dr = droplets[i];
    if (!(dr.radius > 0.0)) bad("init.droplets", "radius must be positive");
    for (int d = 0; d < dim; ++d)
      if (dr.center[d] - dr.radius < box.lo[d] || dr.center[d] + dr.radius > box.hi[d])
        bad("init.droplets", "droplet " + std::to_string(i + 1) + " lies outside the domain");
  }
  if (splits.size() + 1 != droplets.size()) bad("init.splits", "need exactly one split plane between consecutive droplets");
  for (std::size_t i = 1; i < splits.size(); ++i)
    if (!(splits[i] > splits[i - 1])) bad("init.splits", "split planes must increase");
  if (sigma > 0.0 && dt_limit != DtLimit::off) {
    const double dtmax = std::sqrt(0.5 * (rho1 + rho2) * std::pow(element_diagonal(), 3) / sigma / (2.0 * std::numbers::pi));
    const double lim = kTimeStepSafety * dtmax;
    if (dt > lim) {
      const std::string msg = "dt = " + fmt(dt) + " exceeds the capillary limit " + fmt(kTimeStepSafety) + " * " +
                              fmt(dtmax) + " = " + fmt(lim);
      if (dt_limit == DtLimit::error) bad("time.dt", msg);
    }
  }
}

double max_time_step(const SplineSystem& sys, const InterfaceModel& m, double weber) {
  if (!(weber > 0.0)) throw std::invalid_argument("Weber number must be positive");
  if (std::isinf(weber)) return std::numeric_limits<double>::infinity();
  const double rho_bar = 0.5 * (m.rho1 + m.rho2);
  const double h = sys.min_element_diagonal();
  return std::sqrt(rho_bar * h * h * h * weber / (2.0 * std::numbers::pi));
}

double initial_levelset(const Scenario& sc, const std::array<double, 3>& x) {
  std::size_t region = 0;
  while (region < sc.splits.size() && x[0] > sc.splits[region]) ++region;
  const Droplet& dr = sc.droplets[region];
  double r2 = 0.0;
  for (int d = 0; d < sc.dim; ++d) r2 += (x[d] - dr.center[d]) * (x[d] - dr.center[d]);
  return dr.radius - std::sqrt(r2);
}

State initialize(const Scenario& sc, const Assembler& as, const SchemeParams& prm) {
  const SplineSystem& sys = as.system();
  const DofLayout& L = as.layout();
  State s = zero_state(L);
  const Eigen::VectorXd phi =
      project_l2(sys, SpaceId::levelset, [&](const std::array<double, 3>& x) { return initial_levelset(sc, x); });
  s.coeffs.segment(L.begin(Block::levelset), L.size(Block::levelset)) = phi;
  if (prm.scheme == Scheme::entropy_stable)
    s.coeffs.segment(L.begin(Block::aux), L.size(Block::aux)) = as.consistent_aux(s, prm);
  return s;
}

namespace {

bool try_step(const Assembler& as, const State& prev, double mult, const SchemeParams& prm, const NewtonConfig& cfg,
              LinearSolver& lin, StepResult& out) {
  out.next = prev;
  out.next.t = prev.t + prm.dt;
  out.next.step = prev.step + 1;
  out.multiplier = mult;
  out.dt = prm.dt;
  try {
    out.report = solve_step(as, prev, out.next, out.multiplier, prm, cfg, lin);
  } catch (const SingularMatrixError& e) {
    out.report = SolveReport{};
    out.report.message = e.what();
    return false;
  }
  return out.report.converged;
}

}  // namespace

StepResult advance(const Assembler& as, const State& prev, double multiplier, const SchemeParams& prm,
                   const NewtonConfig& cfg, LinearSolver& lin) {
  StepResult res;
  SchemeParams p = prm;
  if (!try_step(as, prev, multiplier, p, cfg, lin, res)) {
    const std::string first = res.report.message;
    p.dt = 0.5 * prm.dt;
    res.halved = true;
    // A stale factorization can carry the chord iteration away from the root; the retry refactors every update.
    NewtonConfig retry = cfg;
    retry.reuse_jacobian = false;
    if (!try_step(as, prev, multiplier, p, retry, lin, res))
      throw StepFailure("Newton failed at step " + std::to_string(prev.step + 1) + " (" + first +
                        "; retry at half step: " + res.report.message + ")");
  }
  const SplineSystem& sys = as.system();
  const DofLayout& L = as.layout();
  res.check = dissipation_identity(as, prev, res.next, p);
  res.record = energies(sys, L, res.next, as.model(), p.groups);
  res.record.dt = p.dt;
  res.record.visc_diss = res.check.viscous;
  res.record.dc_diss = res.check.dc;
  res.record.defect = res.check.defect;
  State mid = res.next;
  mid.coeffs = 0.5 * (prev.coeffs + res.next.coeffs);
  res.record.max_div = field_extrema(sys, L, mid, as.model()).max_div;
  res.extrema = field_extrema(sys, L, res.next, as.model());
  return res;
}

void write_checkpoint(const std::string& path, const DofLayout& L, const State& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  auto put = [&os](auto v) {
    unsigned char b[sizeof v];
    std::uint64_t bits = 0;
    static_assert(sizeof v == 4 || sizeof v == 8);
    std::memcpy(&bits, &v, sizeof v);
    for (std::size_t i = 0; i < sizeof v; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), sizeof v);
  };
  os.write("ELVL", 4);
  put(std::uint32_t{1});
  put(static_cast<std::uint32_t>(L.dim));
  put(L.hash());
  put(static_cast<std::uint64_t>(s.coeffs.size()));
  for (Eigen::Index i = 0; i < s.coeffs.size(); ++i) put(s.coeffs[i]);
  put(s.t);
  put(static_cast<std::int64_t>(s.step));
  if (!os) throw std::runtime_error("short write to checkpoint " + path);
}

State read_checkpoint(const std::string& path, const DofLayout& L) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  auto get = [&is](auto& v) {
    unsigned char b[sizeof v];
    is.read(reinterpret_cast<char*>(b), sizeof v);
    if (!is) throw std::runtime_error("truncated checkpoint");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof v; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, sizeof v);
  };
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "ELVL") throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t version = 0, dim = 0;
  std::uint64_t hash = 0, count = 0;
  get(version);
  get(dim);
  get(hash);
  get(count);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  if (static_cast<int>(dim) != L.dim || hash != L.hash() || count != static_cast<std::uint64_t>(L.n_total()))
    throw std::runtime_error("checkpoint layout does not match the current discretisation");
  State s;
  s.coeffs.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) get(s.coeffs[static_cast<Eigen::Index>(i)]);
  std::int64_t step = 0;
  get(s.t);
  get(step);
  s.step = step;
  return s;
}

RunArtifacts run(const Scenario& sc, const NewtonConfig& newton, const OutputOptions& out,
                 const StepObserver& observer, std::ostream* log) {
  sc.validate();
  namespace fs = std::filesystem;
  SplineSystem sys(sc.dim, sc.elements, sc.box, sc.quad_points);
  const DofLayout L = build_dof_layout(sys, BoundarySpec::no_penetration(sc.dim));
  const InterfaceModel model = sc.interface_model();
  Assembler as(sys, L, model);
  SchemeParams prm = sc.scheme_params();

  if (log && out.verbose) {
    *log << "scenario " << sc.name << ": " << sc.dim << "D, elements";
    for (int d = 0; d < sc.dim; ++d) *log << (d ? "x" : " ") << sc.elements[d];
    *log << ", unknowns " << L.n_reduced() << ", eps " << fmt(model.eps) << "\n";
    *log << "groups: Re " << fmt(prm.groups.reynolds) << ", We " << fmt(prm.groups.weber) << ", Fr^-2 "
         << fmt(prm.groups.inv_froude_sq) << "; scheme "
         << (prm.scheme == Scheme::entropy_stable ? "entropy-stable" : "standard-midpoint") << "\n";
    if (prm.groups.surface_tension_active()) {
      const double dtmax = max_time_step(sys, model, prm.groups.weber);
      *log << "dt " << fmt(sc.dt) << ", capillary limit " << fmt(dtmax);
      if (sc.dt > kTimeStepSafety * dtmax) *log << " (exceeded; continuing as configured)";
      *log << "\n";
    }
  }

  std::ofstream csv;
  fs::path dir(out.dir);
  if (out.write_files) {
    fs::create_directories(dir);
    csv.open(dir / "energy.csv");
    if (!csv) throw std::runtime_error("cannot open energy file in " + out.dir);
    write_energy_header(csv);
  }

  RunArtifacts art;
  State s = initialize(sc, as, prm);
  double mult = 0.0;
  {
    EnergyRecord r0 = energies(sys, L, s, model, prm.groups);
    const FieldExtrema x0 = field_extrema(sys, L, s, model);
    r0.max_div = x0.max_div;
    art.energy.push_back(r0);
    art.extrema.push_back(x0);
    if (csv.is_open()) write_energy_row(csv, r0);
  }
  long last_snap = -1;
  auto snapshot = [&](const State& st) {
    if (!out.write_files || st.step == last_snap) return;
    last_snap = st.step;
    fs::create_directories(dir / "snapshots");
    char name[64];
    std::snprintf(name, sizeof name, "snap_%06ld.vtk", st.step);
    const fs::path p = dir / "snapshots" / name;
    write_vtk_snapshot(p.string(), sys, L, st, model, out.samples_per_element);
    art.snapshots.push_back(p.string());
    art.snapshot_times.push_back(st.t);
  };
  snapshot(s);

  LinearSolver lin;
  const double tiny = 1e-9 * sc.dt;
  while (s.t < sc.t_end - tiny) {
    prm.dt = std::min(sc.dt, sc.t_end - s.t);
    StepResult res;
    try {
      res = advance(as, s, mult, prm, newton, lin);
    } catch (const StepFailure& e) {
      art.aborted = true;
      art.abort_message = e.what();
      if (out.write_files) {
        art.checkpoint = (dir / "abort.ckpt").string();
        write_checkpoint(art.checkpoint, L, s);
      }
      if (log) *log << "abort: " << e.what() << "\n";
      break;
    }
    if (res.halved) art.halved_steps.push_back(res.next.step);
    s = res.next;
    mult = res.multiplier;
    art.energy.push_back(res.record);
    art.reports.push_back(res.report);
    art.checks.push_back(res.check);
    art.extrema.push_back(res.extrema);
    if (csv.is_open()) {
      write_energy_row(csv, res.record);
      csv.flush();
    }
    if (log && out.verbose) {
      *log << "step " << s.step << " t " << fmt(s.t) << " newton " << res.report.iterations << " lu "
           << res.report.factorizations << " |r| " << fmt(res.report.final_norm) << " E " << fmt(res.record.E_total) << " defect " << fmt(res.record.defect)
           << (res.halved ? " (halved)" : "") << "\n"
           << std::flush;
    }
    if (observer) observer(res);
    if (out.snapshot_every > 0 && s.step % out.snapshot_every == 0) snapshot(s);
  }
  snapshot(s);
  if (out.write_files && !art.aborted) {
    art.checkpoint = (dir / "final.ckpt").string();
    write_checkpoint(art.checkpoint, L, s);
  }
  art.final_state = std::move(s);
  art.final_multiplier = mult;
  return art;
}

}  // namespace entrolevel
