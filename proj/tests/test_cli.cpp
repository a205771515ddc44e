#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(ENTROLEVEL_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path tmp(const std::string& name) {
  const fs::path p = fs::path(ENTROLEVEL_TEST_TMP) / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("preset listing and printing") {
  const Result r = sh("presets");
  CHECK(r.code == 0);
  CHECK(r.out.find("static-droplet-20") != std::string::npos);
  CHECK(r.out.find("coalescence-2d") != std::string::npos);
  const Result p = sh("preset static-droplet-20 --print");
  CHECK(p.code == 0);
  CHECK(p.out.find("physics.sigma = 73") != std::string::npos);
}

TEST_CASE("reproducible runs write identical energy files") {
  const fs::path a = tmp("a"), b = tmp("b");
  const std::string common = "preset static-droplet-20 --end 0.003 --reproducible --quiet --out ";
  const Result ra = sh(common + a.string());
  const Result rb = sh(common + b.string());
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(ra.out.find("wall time") == std::string::npos);
  const std::string ea = slurp(a / "energy.csv");
  CHECK_FALSE(ea.empty());
  CHECK(ea == slurp(b / "energy.csv"));
  CHECK(fs::exists(a / "final.ckpt"));
  CHECK(fs::exists(a / "snapshots"));
}

TEST_CASE("config file run and error exit codes") {
  const fs::path dir = tmp("cfg");
  fs::create_directories(dir);
  const fs::path cfg = dir / "pool.cfg";
  std::ofstream(cfg) << "name = \"pool\"\nmesh.nx = 4\nmesh.ny = 4\nmaterials.mu1 = 0.1\nmaterials.mu2 = 0.1\n"
                        "physics.gravity = 1\ntime.dt = 0.01\ntime.end = 0.02\ninit.droplets = (0.5, 0.5, 0.2)\n"
                        "output.dir = \""
                     << (dir / "out").string() << "\"\n";
  const Result ok = sh("run " + cfg.string() + " --quiet");
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "out" / "energy.csv"));

  const fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << "mesh.nx = 4\nphysics.sigmaa = 1\n";
  const Result e = sh("run " + bad.string());
  CHECK(e.code == 2);
  CHECK(e.out.find("line 2, column 1") != std::string::npos);

  const Result dt = sh("preset static-droplet-80 --dt 0.01 --out " + (dir / "dt").string());
  CHECK(dt.code == 2);
  CHECK(dt.out.find("capillary limit") != std::string::npos);

  CHECK(sh("preset nope").code == 2);
  CHECK(sh("").code != 0);
}

TEST_CASE("property suite exits cleanly") {
  const Result r = sh("check");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
