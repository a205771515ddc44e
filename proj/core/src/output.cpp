#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "entrolevel/simulation_driver.hpp"

namespace entrolevel {

void write_vtk_snapshot(const std::string& path, const SplineSystem& sys, const DofLayout& L, const State& s,
                        const InterfaceModel& m, int spe) {
  if (spe < 1) throw std::invalid_argument("samples per element must be positive");
  const int D = sys.dim();
  int np[3] = {1, 1, 1};
  for (int d = 0; d < D; ++d) np[d] = sys.n_elements(d) * spe + 1;
  const std::size_t total = static_cast<std::size_t>(np[0]) * np[1] * np[2];
  std::vector<FieldSample> samples;
  samples.reserve(total);
  for (int k = 0; k < np[2]; ++k)
    for (int j = 0; j < np[1]; ++j)
      for (int i = 0; i < np[0]; ++i) {
        const int idx[3] = {i, j, k};
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int d = 0; d < D; ++d) {
          const double t = static_cast<double>(idx[d]) / (np[d] - 1);
          x[d] = sys.box().lo[d] + t * (sys.box().hi[d] - sys.box().lo[d]);
        }
        samples.push_back(sample_at(sys, L, s, x));
      }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write snapshot " + path);
  char buf[128];
  os << "# vtk DataFile Version 3.0\n";
  std::snprintf(buf, sizeof buf, "entrolevel t=%.17g step=%ld\n", s.t, s.step);
  os << buf << "ASCII\nDATASET STRUCTURED_GRID\n";
  os << "DIMENSIONS " << np[0] << ' ' << np[1] << ' ' << np[2] << "\n";
  os << "POINTS " << total << " double\n";
  for (const auto& f : samples) {
    std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", f.x[0], f.x[1], f.x[2]);
    os << buf;
  }
  os << "POINT_DATA " << total << "\n";
  os << "VECTORS u double\n";
  for (const auto& f : samples) {
    std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", f.u[0], f.u[1], D == 3 ? f.u[2] : 0.0);
    os << buf;
  }
  auto scalar = [&](const char* name, auto get) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (const auto& f : samples) {
      std::snprintf(buf, sizeof buf, "%.10g\n", get(f));
      os << buf;
    }
  };
  scalar("p", [](const FieldSample& f) { return f.p; });
  scalar("phi", [](const FieldSample& f) { return f.phi; });
  scalar("v", [](const FieldSample& f) { return f.v; });
  scalar("rho", [&m](const FieldSample& f) { return density(f.phi, m); });
}

}  // namespace entrolevel
