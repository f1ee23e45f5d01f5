#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "m4nls/core.hpp"

namespace m4nls {

/// Invalid configuration or usage; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Validated batch-run configuration (flat JSON object, unknown keys
/// rejected, defaults filled and echoed).
struct RunConfig {
  std::string command;
  Params params;
  bool has_alpha = false;

  int n = 0;
  double length = 0.0;
  bool has_grid = false;

  double tol = 1e-10;
  int max_iter = 2000;
  double dt = 0.0;  // per-command default

  double mu = 0.0;
  bool has_mu = false;
  double mu_lo = 0.0, mu_hi = 0.0;
  double bisect_tol = 0.05;
  std::vector<double> gamma_list;

  double epsilon = 1e-3;
  std::string perturbation = "scale";
  double t_end = 10.0;
  int record_every = 10;
  double window_fraction = 0.5;
  int k_eigs = 4;

  double u0 = 0.0, upp0 = 0.0;
  bool has_u0 = false, has_upp0 = false;
  double x_max = 30.0;
  double step = 1e-3;

  std::string field_path;
  std::string reference_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  nlohmann::json echo;  // config after defaulting, recorded in the manifest
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

const std::vector<std::string>& known_commands();

}  // namespace m4nls
