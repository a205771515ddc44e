#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "entrolevel/diagnostics.hpp"
#include "entrolevel/discrete_system.hpp"
#include "entrolevel/newton_solver.hpp"
#include "entrolevel/spline_spaces.hpp"

namespace entrolevel {

enum class DtLimit { error, warn, off };

struct Droplet {
  std::array<double, 3> center{0.0, 0.0, 0.0};
  double radius = 0.0;
  bool operator==(const Droplet&) const = default;
};

// Physical setup of one run. Reference scales are unity, so We = 1/sigma,
// Re = 1 with the raw viscosities and Fr^-2 = g.
struct Scenario {
  std::string name = "custom";
  int dim = 2;
  std::array<int, 3> elements{20, 20, 1};
  Box box;
  double rho1 = 1.0, rho2 = 1.0;
  double mu1 = 0.0, mu2 = 0.0;
  double sigma = 0.0;
  double gravity = 0.0;
  double eps_factor = 2.0;
  double eps_norm = 1e-8;
  double dt = 1e-3;
  double t_end = 0.0;
  DtLimit dt_limit = DtLimit::error;
  double dc_constant = 0.0;
  double dc_eps = 1e-8;
  bool supg = true;
  Scheme scheme = Scheme::entropy_stable;
  std::vector<Droplet> droplets;
  std::vector<double> splits;  // x-planes separating consecutive droplets
  int quad_points = 0;

  bool operator==(const Scenario&) const = default;

  // throws std::invalid_argument naming the offending field
  void validate() const;
  double element_diagonal() const;
  InterfaceModel interface_model() const;
  DimensionlessGroups groups() const;
  SchemeParams scheme_params() const;
};

// sqrt(rho_bar h^3 We / (2 pi)) with h the smallest physical element diagonal.
double max_time_step(const SplineSystem& sys, const InterfaceModel& m, double weber);
inline constexpr double kTimeStepSafety = 0.9;

// Signed distance to the droplet owning the split region of x; positive inside.
double initial_levelset(const Scenario& sc, const std::array<double, 3>& x);

State initialize(const Scenario& sc, const Assembler& as, const SchemeParams& prm);

struct StepFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StepResult {
  State next;
  double multiplier = 0.0;
  double dt = 0.0;
  bool halved = false;
  SolveReport report;
  DissipationCheck check;
  EnergyRecord record;
  FieldExtrema extrema;
};

// One time step with a single retry at half the step size and fresh Jacobians.
StepResult advance(const Assembler& as, const State& prev, double multiplier, const SchemeParams& prm,
                   const NewtonConfig& cfg, LinearSolver& lin);

struct OutputOptions {
  std::string dir = "out";
  int snapshot_every = 0;  // steps between snapshots, 0 writes initial and final only
  int samples_per_element = 2;
  bool reproducible = false;
  bool write_files = true;
  bool verbose = true;
  bool operator==(const OutputOptions&) const = default;
};

struct RunArtifacts {
  std::vector<EnergyRecord> energy;
  std::vector<std::string> snapshots;
  std::vector<double> snapshot_times;
  std::vector<SolveReport> reports;
  std::vector<DissipationCheck> checks;
  std::vector<FieldExtrema> extrema;  // per record, including the initial state
  std::vector<long> halved_steps;
  State final_state;
  double final_multiplier = 0.0;
  bool aborted = false;
  std::string abort_message;
  std::string checkpoint;
};

using StepObserver = std::function<void(const StepResult&)>;

RunArtifacts run(const Scenario& sc, const NewtonConfig& newton, const OutputOptions& out,
                 const StepObserver& observer = {}, std::ostream* log = nullptr);

// Binary checkpoint: "ELVL", u32 version, u32 dim, u64 layout hash, u64 count,
// coefficients, t, step; little-endian.
void write_checkpoint(const std::string& path, const DofLayout& L, const State& s);
State read_checkpoint(const std::string& path, const DofLayout& L);

// Legacy ASCII VTK structured grid sampled uniformly per element.
void write_vtk_snapshot(const std::string& path, const SplineSystem& sys, const DofLayout& L, const State& s,
                        const InterfaceModel& m, int samples_per_element);

}  // namespace entrolevel
