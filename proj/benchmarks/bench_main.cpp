#include <benchmark/benchmark.h>

#include <memory>

#include "entrolevel/config.hpp"
#include "entrolevel/interface_calculus.hpp"
#include "entrolevel/newton_solver.hpp"

namespace el = entrolevel;

namespace {

struct Setup {
  el::Scenario sc;
  el::SplineSystem sys;
  el::DofLayout L;
  el::Assembler as;
  el::SchemeParams prm;
  el::State prev;
  explicit Setup(int n)
      : sc(scenario(n)),
        sys(sc.dim, sc.elements, sc.box, sc.quad_points),
        L(el::build_dof_layout(sys, el::BoundarySpec::no_penetration(sc.dim))),
        as(sys, L, sc.interface_model()),
        prm(sc.scheme_params()),
        prev(el::initialize(sc, as, prm)) {}
  static el::Scenario scenario(int n) {
    el::Scenario s = el::preset_config("static-droplet-20").scenario;
    s.elements = {n, n, 1};
    return s;
  }
};

Setup& setup(int n) {
  static std::unique_ptr<Setup> s[3];
  const int k = n == 10 ? 0 : n == 20 ? 1 : 2;
  if (!s[k]) s[k] = std::make_unique<Setup>(n);
  return *s[k];
}

void BM_Heaviside(benchmark::State& st) {
  double x = -1.3, acc = 0.0;
  for (auto _ : st) {
    acc += el::heaviside(x, 0.7) + el::dirac(x, 0.7);
    x += 1e-4;
    if (x > 1.3) x = -1.3;
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_Heaviside);

void BM_Residual(benchmark::State& st) {
  Setup& s = setup(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(s.as.residual(s.prev, s.prev, 0.0, s.prm));
  st.counters["unknowns"] = s.L.n_reduced();
}
BENCHMARK(BM_Residual)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Jacobian(benchmark::State& st) {
  Setup& s = setup(static_cast<int>(st.range(0)));
  el::SparseMatrix J = s.as.pattern();
  for (auto _ : st) {
    s.as.jacobian(s.prev, s.prev, 0.0, s.prm, J);
    benchmark::ClobberMemory();
  }
  st.counters["nnz"] = static_cast<double>(J.nonZeros());
}
BENCHMARK(BM_Jacobian)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Factorize(benchmark::State& st) {
  Setup& s = setup(static_cast<int>(st.range(0)));
  el::SparseMatrix J = s.as.pattern();
  s.as.jacobian(s.prev, s.prev, 0.0, s.prm, J);
  el::LinearSolver lin;
  for (auto _ : st) lin.factorize(J);
  st.SetLabel(el::LinearSolver::backend());
}
BENCHMARK(BM_Factorize)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
