#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "entrolevel/config.hpp"

namespace entrolevel {

inline constexpr double kYoungLaplaceJump = 36.5;  // sigma / r for the static droplet

struct DropletRun {
  int elements = 0;
  double jump = 0.0;
  double plateau_factor = 0.0;  // multiple of eps bounding the sampled plateaus
  double surface_energy0 = 0.0;
  double surface_drift = 0.0;  // max |E_S - E_S0| / E_S0 over the run
  double max_v = 0.0;
  RunArtifacts artifacts;
};

struct ConvergenceStudy {
  std::vector<DropletRun> runs;
  double richardson_order = 0.0;      // log2 of successive jump differences
  std::vector<double> error_orders;   // log2 of successive errors against sigma / r
  bool monotone = false;              // errors strictly decreasing
};

// Pressure jump across the horizontal line through the droplet center.
double droplet_pressure_jump(const Scenario& sc, const State& s, double* factor = nullptr);

DropletRun run_static_droplet(const RunConfig& cfg, std::ostream* log = nullptr);
ConvergenceStudy static_droplet_convergence(const std::vector<int>& meshes, const RunConfig& base,
                                            std::ostream* log = nullptr);
void write_convergence_table(std::ostream& os, const ConvergenceStudy& st);

struct SchemeComparison {
  RunArtifacts entropy;
  RunArtifacts midpoint;
  std::vector<double> ratio;  // |midpoint defect| / |entropy defect| per step
  double fraction_10x = 0.0;
};

SchemeComparison compare_schemes(const RunConfig& cfg, std::ostream* log = nullptr);
void write_defect_series(std::ostream& os, const SchemeComparison& c);

}  // namespace entrolevel
