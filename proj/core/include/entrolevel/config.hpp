#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "entrolevel/newton_solver.hpp"
#include "entrolevel/simulation_driver.hpp"

namespace entrolevel {

struct RunConfig {
  Scenario scenario;
  NewtonConfig newton;
  OutputOptions output;
  bool operator==(const RunConfig&) const = default;
};

// line and column are 1-based; zero when the error is not tied to a position.
struct ConfigError : std::runtime_error {
  int line = 0;
  int column = 0;
  std::string key;
  ConfigError(const std::string& msg, int l, int c, std::string k);
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys are rejected.
// Throws ConfigError naming the offending key.
void validate_config(const RunConfig& cfg);
RunConfig parse_config(std::string_view text, bool validate = true);
RunConfig load_config(const std::string& path, bool validate = true);
std::string serialize_config(const RunConfig& cfg);

std::vector<std::string> preset_names();
// throws std::invalid_argument for unknown names
RunConfig preset_config(const std::string& name);

}  // namespace entrolevel
