#include "entrolevel/config.hpp"

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace entrolevel {

ConfigError::ConfigError(const std::string& msg, int l, int c, std::string k)
    : std::runtime_error(l > 0 ? "line " + std::to_string(l) + ", column " + std::to_string(c) + ": " + msg : msg),
      line(l),
      column(c),
      key(std::move(k)) {}

namespace {

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

struct Cursor {
  int line;
  int column;
  std::string key;
};

[[noreturn]] void fail(const Cursor& c, const std::string& msg) { throw ConfigError(msg, c.line, c.column, c.key); }

double to_double(const std::string& s, const Cursor& c) {
  const char* b = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(b, &end);
  if (end == b || *end != '\0' || errno == ERANGE) fail(c, "expected a number for " + c.key + ", got '" + s + "'");
  return v;
}

int to_int(const std::string& s, const Cursor& c) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(c, "expected an integer for " + c.key + ", got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s, const Cursor& c) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(c, "expected true or false for " + c.key + ", got '" + s + "'");
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

std::vector<Droplet> to_droplets(const std::string& s, int dim, const Cursor& c) {
  std::vector<Droplet> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',' || s[i] == ';') {
      ++i;
      continue;
    }
    if (s[i] != '(') fail(c, "droplets are written as (x,y,r) groups");
    const std::size_t j = s.find(')', i);
    if (j == std::string::npos) fail(c, "unterminated droplet group");
    std::vector<double> vals;
    std::stringstream ss(s.substr(i + 1, j - i - 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto a = item.find_first_not_of(" \t");
      const auto b = item.find_last_not_of(" \t");
      if (a == std::string::npos) fail(c, "empty droplet component");
      vals.push_back(to_double(item.substr(a, b - a + 1), c));
    }
    if (static_cast<int>(vals.size()) != dim + 1)
      fail(c, "droplet needs " + std::to_string(dim + 1) + " components (center and radius)");
    Droplet d;
    for (int k = 0; k < dim; ++k) d.center[k] = vals[k];
    d.radius = vals[dim];
    out.push_back(d);
    i = j + 1;
  }
  return out;
}

std::vector<double> to_list(const std::string& s, const Cursor& c) {
  std::vector<double> out;
  std::string item;
  std::string t = s;
  for (char& ch : t)
    if (ch == ',') ch = ' ';
  std::stringstream ss(t);
  while (ss >> item) out.push_back(to_double(item, c));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const Cursor&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = [] {
    std::map<std::string, Setter> s;
    auto dbl = [&s](const std::string& k, double Scenario::*f) {
      s[k] = [f](RunConfig& c, const std::string& v, const Cursor& cur) { c.scenario.*f = to_double(v, cur); };
    };
    s["name"] = [](RunConfig& c, const std::string& v, const Cursor&) { c.scenario.name = unquote(v); };
    s["scheme"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      const std::string u = unquote(v);
      if (u == "entropy" || u == "entropy-stable")
        c.scenario.scheme = Scheme::entropy_stable;
      else if (u == "midpoint" || u == "standard-midpoint")
        c.scenario.scheme = Scheme::standard_midpoint;
      else
        fail(cur, "scheme must be entropy or midpoint");
    };
    s["mesh.dim"] = [](RunConfig& c, const std::string& v, const Cursor& cur) { c.scenario.dim = to_int(v, cur); };
    const char* ax = "xyz";
    for (int d = 0; d < 3; ++d) {
      s[std::string("mesh.n") + ax[d]] = [d](RunConfig& c, const std::string& v, const Cursor& cur) {
        c.scenario.elements[d] = to_int(v, cur);
      };
      s[std::string("mesh.") + ax[d] + "0"] = [d](RunConfig& c, const std::string& v, const Cursor& cur) {
        c.scenario.box.lo[d] = to_double(v, cur);
      };
      s[std::string("mesh.") + ax[d] + "1"] = [d](RunConfig& c, const std::string& v, const Cursor& cur) {
        c.scenario.box.hi[d] = to_double(v, cur);
      };
    }
    s["mesh.quad_points"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.scenario.quad_points = to_int(v, cur);
    };
    dbl("materials.rho1", &Scenario::rho1);
    dbl("materials.rho2", &Scenario::rho2);
    dbl("materials.mu1", &Scenario::mu1);
    dbl("materials.mu2", &Scenario::mu2);
    dbl("physics.sigma", &Scenario::sigma);
    dbl("physics.gravity", &Scenario::gravity);
    dbl("interface.eps_factor", &Scenario::eps_factor);
    dbl("interface.eps_norm", &Scenario::eps_norm);
    dbl("time.dt", &Scenario::dt);
    dbl("time.end", &Scenario::t_end);
    s["time.dt_limit"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      const std::string u = unquote(v);
      if (u == "error")
        c.scenario.dt_limit = DtLimit::error;
      else if (u == "warn")
        c.scenario.dt_limit = DtLimit::warn;
      else if (u == "off")
        c.scenario.dt_limit = DtLimit::off;
      else
        fail(cur, "time.dt_limit must be error, warn or off");
    };
    dbl("stabilization.dc_constant", &Scenario::dc_constant);
    dbl("stabilization.dc_eps", &Scenario::dc_eps);
    s["stabilization.supg"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.scenario.supg = to_bool(v, cur);
    };
    s["init.droplets"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.scenario.droplets = to_droplets(unquote(v), c.scenario.dim, cur);
    };
    s["init.splits"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.scenario.splits = to_list(unquote(v), cur);
    };
    s["output.dir"] = [](RunConfig& c, const std::string& v, const Cursor&) { c.output.dir = unquote(v); };
    s["output.snapshots"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.output.snapshot_every = to_int(v, cur);
    };
    s["output.samples_per_element"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.output.samples_per_element = to_int(v, cur);
    };
    s["output.reproducible"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.output.reproducible = to_bool(v, cur);
    };
    s["newton.rel_tol"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.rel_tol = to_double(v, cur);
    };
    s["newton.abs_tol"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.abs_tol = to_double(v, cur);
    };
    s["newton.max_iter"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.max_iter = to_int(v, cur);
    };
    s["newton.line_search"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.line_search = to_bool(v, cur);
    };
    s["newton.reuse_jacobian"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.reuse_jacobian = to_bool(v, cur);
    };
    s["newton.reuse_contraction"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.reuse_contraction = to_double(v, cur);
    };
    s["newton.max_cuts"] = [](RunConfig& c, const std::string& v, const Cursor& cur) {
      c.newton.max_cuts = to_int(v, cur);
    };
    return s;
  }();
  return m;
}

}  // namespace

void validate_config(const RunConfig& c) {
  try {
    c.scenario.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    throw ConfigError(msg, 0, 0, msg.substr(0, msg.find(':')));
  }
  auto bad = [](const std::string& k, const std::string& why) { throw ConfigError(k + ": " + why, 0, 0, k); };
  if (!(c.newton.rel_tol > 0.0)) bad("newton.rel_tol", "must be positive");
  if (!(c.newton.abs_tol >= 0.0)) bad("newton.abs_tol", "must be non-negative");
  if (c.newton.max_iter < 1) bad("newton.max_iter", "must be at least 1");
  if (c.newton.max_cuts < 0) bad("newton.max_cuts", "must be non-negative");
  if (!(c.newton.reuse_contraction > 0.0 && c.newton.reuse_contraction < 1.0))
    bad("newton.reuse_contraction", "must lie in (0, 1)");
  if (c.output.samples_per_element < 1) bad("output.samples_per_element", "must be positive");
  if (c.output.snapshot_every < 0) bad("output.snapshots", "must be non-negative");
  if (c.scenario.quad_points < 0) bad("mesh.quad_points", "must be non-negative");
}

RunConfig parse_config(std::string_view text, bool validate) {
  RunConfig cfg;
  cfg.scenario.dt_limit = DtLimit::error;
  std::set<std::string> seen;
  // Dimension first so droplet tuples are read with the right arity.
  struct Entry {
    std::string key, value;
    Cursor cur;
  };
  std::vector<Entry> entries;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip comment outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail({lineno, static_cast<int>(first) + 1, ""}, "expected 'key = value'");
    std::string key = line.substr(first, eq - first);
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key.empty()) fail({lineno, static_cast<int>(first) + 1, ""}, "missing key before '='");
    for (std::size_t i = 0; i < key.size(); ++i)
      if (std::isspace(static_cast<unsigned char>(key[i])))
        fail({lineno, static_cast<int>(first + i) + 1, key}, "whitespace inside key");
    const std::size_t vstart = line.find_first_not_of(" \t", eq + 1);
    if (vstart == std::string::npos) fail({lineno, static_cast<int>(line.size()) + 1, key}, "missing value for " + key);
    std::string value = line.substr(vstart);
    value.erase(value.find_last_not_of(" \t") + 1);
    if (!seen.insert(key).second) fail({lineno, static_cast<int>(first) + 1, key}, "duplicate key " + key);
    if (!setters().count(key)) fail({lineno, static_cast<int>(first) + 1, key}, "unknown key " + key);
    entries.push_back({key, value, {lineno, static_cast<int>(vstart) + 1, key}});
  }
  for (const auto& e : entries)
    if (e.key == "mesh.dim") setters().at(e.key)(cfg, e.value, e.cur);
  for (const auto& e : entries)
    if (e.key != "mesh.dim") setters().at(e.key)(cfg, e.value, e.cur);
  if (validate) validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path, bool validate) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), validate);
}

std::string serialize_config(const RunConfig& c) {
  const Scenario& s = c.scenario;
  std::ostringstream os;
  os << "name = \"" << s.name << "\"\n";
  os << "scheme = " << (s.scheme == Scheme::entropy_stable ? "entropy" : "midpoint") << "\n";
  os << "mesh.dim = " << s.dim << "\n";
  const char* ax = "xyz";
  for (int d = 0; d < s.dim; ++d) {
    os << "mesh.n" << ax[d] << " = " << s.elements[d] << "\n";
    os << "mesh." << ax[d] << "0 = " << num(s.box.lo[d]) << "\n";
    os << "mesh." << ax[d] << "1 = " << num(s.box.hi[d]) << "\n";
  }
  os << "mesh.quad_points = " << s.quad_points << "\n";
  os << "materials.rho1 = " << num(s.rho1) << "\n";
  os << "materials.rho2 = " << num(s.rho2) << "\n";
  os << "materials.mu1 = " << num(s.mu1) << "\n";
  os << "materials.mu2 = " << num(s.mu2) << "\n";
  os << "physics.sigma = " << num(s.sigma) << "\n";
  os << "physics.gravity = " << num(s.gravity) << "\n";
  os << "interface.eps_factor = " << num(s.eps_factor) << "\n";
  os << "interface.eps_norm = " << num(s.eps_norm) << "\n";
  os << "time.dt = " << num(s.dt) << "\n";
  os << "time.end = " << num(s.t_end) << "\n";
  os << "time.dt_limit = "
     << (s.dt_limit == DtLimit::error ? "error" : s.dt_limit == DtLimit::warn ? "warn" : "off") << "\n";
  os << "stabilization.dc_constant = " << num(s.dc_constant) << "\n";
  os << "stabilization.dc_eps = " << num(s.dc_eps) << "\n";
  os << "stabilization.supg = " << (s.supg ? "true" : "false") << "\n";
  os << "init.droplets = \"";
  for (std::size_t i = 0; i < s.droplets.size(); ++i) {
    os << (i ? " (" : "(");
    for (int d = 0; d < s.dim; ++d) os << num(s.droplets[i].center[d]) << ",";
    os << num(s.droplets[i].radius) << ")";
  }
  os << "\"\n";
  if (!s.splits.empty()) {
    os << "init.splits = \"";
    for (std::size_t i = 0; i < s.splits.size(); ++i) os << (i ? " " : "") << num(s.splits[i]);
    os << "\"\n";
  }
  os << "output.dir = \"" << c.output.dir << "\"\n";
  os << "output.snapshots = " << c.output.snapshot_every << "\n";
  os << "output.samples_per_element = " << c.output.samples_per_element << "\n";
  os << "output.reproducible = " << (c.output.reproducible ? "true" : "false") << "\n";
  os << "newton.rel_tol = " << num(c.newton.rel_tol) << "\n";
  os << "newton.abs_tol = " << num(c.newton.abs_tol) << "\n";
  os << "newton.max_iter = " << c.newton.max_iter << "\n";
  os << "newton.line_search = " << (c.newton.line_search ? "true" : "false") << "\n";
  os << "newton.max_cuts = " << c.newton.max_cuts << "\n";
  os << "newton.reuse_jacobian = " << (c.newton.reuse_jacobian ? "true" : "false") << "\n";
  os << "newton.reuse_contraction = " << num(c.newton.reuse_contraction) << "\n";
  return os.str();
}

std::vector<std::string> preset_names() {
  return {"static-droplet-20", "static-droplet-40", "static-droplet-80", "coalescence-2d"};
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.newton.reuse_jacobian = true;
  Scenario& s = c.scenario;
  s.name = name;
  s.dim = 2;
  if (name.rfind("static-droplet-", 0) == 0) {
    const std::string n = name.substr(15);
    if (n != "20" && n != "40" && n != "80") throw std::invalid_argument("unknown preset " + name);
    const int ne = std::stoi(n);
    s.elements = {ne, ne, 1};
    s.box.lo = {0.0, 0.0, 0.0};
    s.box.hi = {8.0, 8.0, 1.0};
    s.rho1 = 1.0;
    s.rho2 = 0.1;
    s.mu1 = s.mu2 = 0.0;
    s.sigma = 73.0;
    s.gravity = 0.0;
    s.dt = 1e-3;
    s.t_end = 0.05;
    s.dc_constant = 0.0;
    s.droplets = {Droplet{{4.0, 4.0, 0.0}, 2.0}};
    c.output.dir = "out/" + name;
    c.output.snapshot_every = 10;
    return c;
  }
  if (name == "coalescence-2d") {
    s.elements = {50, 50, 1};
    s.box.lo = {0.0, 0.0, 0.0};
    s.box.hi = {1.0, 1.0, 1.0};
    s.rho1 = 100.0;
    s.rho2 = 1.0;
    s.mu1 = s.mu2 = 1.0;
    s.sigma = 0.1;
    s.gravity = 0.0;
    s.dt = 0.1;
    s.t_end = 80.0;
    s.dt_limit = DtLimit::warn;
    s.dc_constant = 0.4;
    // Regularizes both norms in theta_K at unit scale. Small values make theta_K ~ C h |R_M| / dc_eps
    // wherever the velocity gradient is below dc_eps; that over-damps the neck and stalls Newton.
    s.dc_eps = 1.0;
    s.droplets = {Droplet{{0.4, 0.5, 0.0}, 0.25}, Droplet{{0.78, 0.5, 0.0}, 0.1}};
    s.splits = {0.665};
    c.output.dir = "out/" + name;
    c.output.snapshot_every = 20;
    return c;
  }
  throw std::invalid_argument("unknown preset " + name);
}

}  // namespace entrolevel
