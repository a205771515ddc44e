#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "entrolevel/config.hpp"
#include "entrolevel/property_checks.hpp"
#include "entrolevel/studies.hpp"

namespace el = entrolevel;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::string> out;
  std::optional<int> snapshots;
  bool reproducible = false;
  std::optional<double> dt;
  std::optional<double> end;
  std::optional<std::string> mesh;
  std::optional<std::string> scheme;
  bool quiet = false;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--out", o.out, "output directory");
  app->add_option("--snapshots", o.snapshots, "steps between field snapshots (0: first and last only)");
  app->add_flag("--reproducible", o.reproducible, "omit wall-clock timings from the log");
  app->add_option("--dt", o.dt, "time step");
  app->add_option("--end", o.end, "end time");
  app->add_option("--mesh", o.mesh, "elements per direction, e.g. 40x40");
  app->add_option("--scheme", o.scheme, "entropy or midpoint")->check(CLI::IsMember({"entropy", "midpoint"}));
  app->add_flag("--quiet", o.quiet, "suppress per-step log lines");
}

void apply(el::RunConfig& c, const Overrides& o) {
  if (o.out) c.output.dir = *o.out;
  if (o.snapshots) c.output.snapshot_every = *o.snapshots;
  if (o.reproducible) c.output.reproducible = true;
  if (o.dt) c.scenario.dt = *o.dt;
  if (o.end) c.scenario.t_end = *o.end;
  if (o.scheme) c.scenario.scheme = *o.scheme == "entropy" ? el::Scheme::entropy_stable : el::Scheme::standard_midpoint;
  if (o.mesh) {
    std::array<int, 3> n{1, 1, 1};
    int k = 0;
    std::size_t pos = 0;
    const std::string& m = *o.mesh;
    while (pos <= m.size() && k < 3) {
      const std::size_t x = m.find('x', pos);
      const std::string part = m.substr(pos, x == std::string::npos ? std::string::npos : x - pos);
      try {
        n[k++] = std::stoi(part);
      } catch (const std::exception&) {
        throw el::ConfigError("--mesh: expected NxN, got '" + m + "'", 0, 0, "mesh");
      }
      if (x == std::string::npos) break;
      pos = x + 1;
    }
    if (k != c.scenario.dim) throw el::ConfigError("--mesh: expected one count per dimension", 0, 0, "mesh");
    c.scenario.elements = n;
  }
  el::validate_config(c);
}

// Loads a config file, or a preset when the argument names one.
el::RunConfig resolve(const std::string& what) {
  for (const auto& p : el::preset_names())
    if (p == what) return el::preset_config(what);
  return el::load_config(what, false);
}

int finish_run(const el::RunArtifacts& art, const el::RunConfig& c) {
  if (art.aborted) {
    if (c.output.write_files) {
      std::ofstream flag(fs::path(c.output.dir) / "INCOMPLETE");
      flag << art.abort_message << "\n";
    }
    std::cerr << "run aborted; partial artifacts in " << c.output.dir << ": " << art.abort_message << "\n";
    return 1;
  }
  std::cout << "wrote " << (fs::path(c.output.dir) / "energy.csv").string() << " and " << art.snapshots.size()
            << " snapshots\n";
  return 0;
}

int do_run(el::RunConfig c, const Overrides& o) {
  apply(c, o);
  c.output.verbose = !o.quiet;
  const auto t0 = std::chrono::steady_clock::now();
  const el::RunArtifacts art = el::run(c.scenario, c.newton, c.output, {}, &std::cout);
  if (!c.output.reproducible) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("wall time %.2f s\n", s);
  }
  return finish_run(art, c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entrolevel: entropy-stable level-set two-phase flow solver"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path, preset_name, study, compare_target;

  auto* run_cmd = app.add_subcommand("run", "run a configuration file");
  run_cmd->add_option("config", config_path, "configuration file")->required();
  add_overrides(run_cmd, o);

  auto* preset_cmd = app.add_subcommand("preset", "run a built-in scenario");
  preset_cmd->add_option("name", preset_name, "preset name")->required();
  add_overrides(preset_cmd, o);
  bool print_only = false;
  preset_cmd->add_flag("--print", print_only, "print the preset configuration and exit");

  auto* conv_cmd = app.add_subcommand("convergence", "mesh convergence study");
  conv_cmd->add_option("study", study, "study name")->required()->check(CLI::IsMember({"static-droplet"}));
  add_overrides(conv_cmd, o);

  auto* cmp_cmd = app.add_subcommand("compare-schemes", "entropy-stable versus standard midpoint defects");
  cmp_cmd->add_option("config", compare_target, "configuration file or preset name")->required();
  add_overrides(cmp_cmd, o);

  auto* check_cmd = app.add_subcommand("check", "run the property suite");

  auto* list_cmd = app.add_subcommand("presets", "list preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list_cmd) {
      for (const auto& p : el::preset_names()) std::cout << p << "\n";
      return 0;
    }
    if (*run_cmd) return do_run(el::load_config(config_path, false), o);
    if (*preset_cmd) {
      el::RunConfig c = el::preset_config(preset_name);
      if (print_only) {
        apply(c, o);
        std::cout << el::serialize_config(c);
        return 0;
      }
      return do_run(c, o);
    }
    if (*conv_cmd) {
      el::RunConfig base = el::preset_config("static-droplet-20");
      base.output.dir = "out/convergence";
      if (o.out) base.output.dir = *o.out;
      if (o.scheme) base.scenario.scheme = *o.scheme == "entropy" ? el::Scheme::entropy_stable
                                                                   : el::Scheme::standard_midpoint;
      base.output.verbose = !o.quiet;
      if (o.reproducible) base.output.reproducible = true;
      if (o.snapshots) base.output.snapshot_every = *o.snapshots;
      const auto st = el::static_droplet_convergence({20, 40, 80}, base, &std::cout);
      el::write_convergence_table(std::cout, st);
      fs::create_directories(base.output.dir);
      std::ofstream table(fs::path(base.output.dir) / "convergence.txt");
      el::write_convergence_table(table, st);
      for (const auto& r : st.runs)
        if (r.artifacts.aborted) return 1;
      return 0;
    }
    if (*cmp_cmd) {
      el::RunConfig c = resolve(compare_target);
      c.output.dir = "out/compare-" + c.scenario.name;
      apply(c, o);
      c.output.verbose = !o.quiet;
      const auto cmp = el::compare_schemes(c, &std::cout);
      fs::create_directories(c.output.dir);
      std::ofstream csv(fs::path(c.output.dir) / "defects.csv");
      el::write_defect_series(csv, cmp);
      el::write_defect_series(std::cout, cmp);
      std::printf("steps with midpoint defect >= 10x entropy-stable: %.1f%%\n", 100.0 * cmp.fraction_10x);
      return cmp.entropy.aborted || cmp.midpoint.aborted ? 1 : 0;
    }
    if (*check_cmd) {
      bool all = true;
      for (const auto& r : el::run_property_suite()) {
        std::printf("%s  %-48s measured %.3e limit %.3e  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.measured,
                    r.limit, r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const el::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
