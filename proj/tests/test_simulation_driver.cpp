#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "entrolevel/config.hpp"
#include "entrolevel/simulation_driver.hpp"

using namespace entrolevel;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  const fs::path p = fs::path(ENTROLEVEL_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Scenario resting_pool() {
  Scenario sc;
  sc.elements = {6, 6, 1};
  sc.rho1 = sc.rho2 = 1.0;
  sc.mu1 = sc.mu2 = 0.1;
  sc.gravity = 2.0;
  sc.dt = 0.01;
  sc.t_end = 0.03;
  sc.droplets = {Droplet{{0.5, 0.5, 0.0}, 0.2}};
  return sc;
}

OutputOptions quiet_output(const fs::path& dir, bool files) {
  OutputOptions o;
  o.dir = dir.string();
  o.write_files = files;
  o.verbose = false;
  return o;
}

}  // namespace

TEST_CASE("capillary time step limit") {
  InterfaceModel m;
  m.rho1 = 1.0;
  m.rho2 = 0.1;
  SplineSystem coarse(2, {10, 10, 1}, Box{});
  SplineSystem fine(2, {20, 20, 1}, Box{});
  const double h = std::sqrt(2.0) / 10.0;
  const double we = 1.0 / 73.0;
  CHECK(max_time_step(coarse, m, we) == doctest::Approx(std::sqrt(0.55 * h * h * h * we / (2.0 * std::numbers::pi))));
  CHECK(max_time_step(coarse, m, we) / max_time_step(fine, m, we) == doctest::Approx(std::pow(2.0, 1.5)));
  CHECK(std::isinf(max_time_step(coarse, m, std::numeric_limits<double>::infinity())));
  CHECK_THROWS_AS(max_time_step(coarse, m, 0.0), std::invalid_argument);
}

TEST_CASE("static droplet presets respect the capillary limit") {
  for (const char* name : {"static-droplet-20", "static-droplet-40", "static-droplet-80"}) {
    const Scenario sc = preset_config(name).scenario;
    const SplineSystem sys(2, sc.elements, sc.box);
    const double limit = max_time_step(sys, sc.interface_model(), sc.groups().weber);
    CHECK(sc.dt <= kTimeStepSafety * limit);
    CHECK_NOTHROW(sc.validate());
  }
}

TEST_CASE("too large a time step is rejected with both values") {
  Scenario sc = preset_config("static-droplet-80").scenario;
  sc.dt = 0.01;
  try {
    sc.validate();
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("time.dt") != std::string::npos);
    CHECK(msg.find("0.01") != std::string::npos);
    CHECK(msg.find("0.9") != std::string::npos);
  }
  sc.dt_limit = DtLimit::warn;
  CHECK_NOTHROW(sc.validate());
}

TEST_CASE("initial level set is a signed distance") {
  const Scenario sd = preset_config("static-droplet-20").scenario;
  CHECK(initial_levelset(sd, {4.0, 4.0, 0.0}) == doctest::Approx(2.0));
  CHECK(initial_levelset(sd, {0.0, 0.0, 0.0}) == doctest::Approx(2.0 - std::sqrt(32.0)));
  CHECK(initial_levelset(sd, {6.0, 4.0, 0.0}) == doctest::Approx(0.0));
  const Scenario co = preset_config("coalescence-2d").scenario;
  CHECK(initial_levelset(co, {0.4, 0.5, 0.0}) == doctest::Approx(0.25));
  CHECK(initial_levelset(co, {0.78, 0.5, 0.0}) == doctest::Approx(0.1));
  CHECK(initial_levelset(co, {0.66, 0.5, 0.0}) == doctest::Approx(0.25 - 0.26));
  CHECK(initial_levelset(co, {0.67, 0.5, 0.0}) == doctest::Approx(0.1 - 0.11));
}

TEST_CASE("scenario validation names the field") {
  Scenario sc = resting_pool();
  sc.rho2 = -1.0;
  CHECK_THROWS_WITH(sc.validate(), doctest::Contains("materials.rho2"));
  sc = resting_pool();
  sc.droplets[0].radius = 0.7;
  CHECK_THROWS_WITH(sc.validate(), doctest::Contains("outside the domain"));
  sc = resting_pool();
  sc.splits = {0.5};
  CHECK_THROWS_WITH(sc.validate(), doctest::Contains("init.splits"));
}

TEST_CASE("zero end time records only the initial state") {
  Scenario sc = resting_pool();
  sc.t_end = 0.0;
  const RunArtifacts a = run(sc, NewtonConfig{}, quiet_output(tmp("zero"), true));
  CHECK(a.energy.size() == 1);
  CHECK(a.reports.empty());
  CHECK_FALSE(a.aborted);
  CHECK(a.snapshots.size() == 1);
  CHECK(fs::exists(fs::path(ENTROLEVEL_TEST_TMP) / "zero" / "energy.csv"));
}

TEST_CASE("resting pool stays at rest") {
  const fs::path dir = tmp("pool");
  const RunArtifacts a = run(resting_pool(), NewtonConfig{}, quiet_output(dir, true));
  REQUIRE(a.energy.size() == 4);
  CHECK(a.final_state.step == 3);
  CHECK(a.final_state.t == doctest::Approx(0.03));
  for (const auto& x : a.extrema) CHECK(x.max_speed < 1e-10);
  for (const auto& r : a.reports) CHECK(r.converged);
  CHECK(fs::exists(dir / "final.ckpt"));
  CHECK(read_energy_csv((dir / "energy.csv").string()).size() == 4);
  CHECK(a.snapshots.size() == 2);
}

TEST_CASE("short end time shortens the final step") {
  Scenario sc = resting_pool();
  sc.t_end = 0.025;
  const RunArtifacts a = run(sc, NewtonConfig{}, quiet_output(tmp("short"), false));
  REQUIRE(a.energy.size() == 4);
  CHECK(a.energy.back().t == doctest::Approx(0.025));
}

TEST_CASE("checkpoint round trip and mismatch detection") {
  const fs::path dir = tmp("ckpt");
  Scenario sc = resting_pool();
  const RunArtifacts a = run(sc, NewtonConfig{}, quiet_output(dir, true));
  SplineSystem sys(2, sc.elements, sc.box);
  const DofLayout L = build_dof_layout(sys, BoundarySpec::no_penetration(2));
  const State back = read_checkpoint(a.checkpoint, L);
  CHECK(back.step == a.final_state.step);
  CHECK(back.t == a.final_state.t);
  CHECK((back.coeffs - a.final_state.coeffs).norm() == 0.0);

  SplineSystem other(2, {7, 6, 1}, sc.box);
  const DofLayout L2 = build_dof_layout(other, BoundarySpec::no_penetration(2));
  CHECK_THROWS_WITH(read_checkpoint(a.checkpoint, L2), doctest::Contains("layout"));

  const std::string junk = (dir / "junk.ckpt").string();
  std::ofstream(junk) << "not a checkpoint at all";
  CHECK_THROWS(read_checkpoint(junk, L));
  CHECK_THROWS(read_checkpoint((dir / "missing.ckpt").string(), L));
}

TEST_CASE("static droplet keeps the density within the phase values") {
  RunConfig c = preset_config("static-droplet-20");
  c.scenario.t_end = 2.0 * c.scenario.dt;
  const RunArtifacts a = run(c.scenario, c.newton, quiet_output(tmp("droplet"), false));
  REQUIRE(a.extrema.size() == 3);
  for (const auto& x : a.extrema) {
    CHECK(x.rho_min >= c.scenario.rho2 - 1e-12);
    CHECK(x.rho_max <= c.scenario.rho1 + 1e-12);
  }
  for (const auto& r : a.reports) CHECK(r.converged);
}

TEST_CASE("failed step aborts with a checkpoint of the last good state") {
  const fs::path dir = tmp("abort");
  RunConfig c = preset_config("static-droplet-20");
  c.scenario.t_end = 3.0 * c.scenario.dt;
  NewtonConfig nc;
  nc.max_iter = 0;
  const RunArtifacts a = run(c.scenario, nc, quiet_output(dir, true));
  CHECK(a.aborted);
  CHECK(a.abort_message.find("Newton failed at step 1") != std::string::npos);
  CHECK(fs::exists(dir / "abort.ckpt"));
  CHECK_FALSE(fs::exists(dir / "final.ckpt"));
  CHECK(a.energy.size() == 1);
}
