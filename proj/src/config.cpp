#include "m4nls/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace m4nls {

using nlohmann::json;

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds = {
      "ground-state",  "mass-min",  "spectrum",    "stability-condition",
      "evolve",        "stability-experiment",     "decay-fit",
      "critical-mass", "gamma-limit", "shoot-1d",  "verify"};
  return cmds;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "command", "gamma", "beta", "alpha", "sigma", "dim", "n", "L",
    "tol", "max_iter", "dt", "mu", "mu_lo", "mu_hi", "bisect_tol", "gamma_list",
    "epsilon", "perturbation", "t_end", "record_every", "window_fraction", "k",
    "u0", "upp0", "x_max", "step", "field", "reference", "out_dir", "seed", "threads"};

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError("config key \"" + key + "\": " + why);
}

double need_number(const json& j, const std::string& key) {
  if (!j.contains(key)) bad(key, "missing");
  if (!j[key].is_number()) bad(key, "must be a number");
  return j[key].get<double>();
}

double opt_number(const json& j, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) bad(key, "must be a number");
  return j[key].get<double>();
}

long opt_integer(const json& j, const std::string& key, long def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) bad(key, "must be an integer");
  return j[key].get<long>();
}

std::string opt_string(const json& j, const std::string& key, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) bad(key, "must be a string");
  return j[key].get<std::string>();
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  // duplicate keys are detected during parsing
  std::vector<std::set<std::string>> key_stack;
  json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::object_start) {
      key_stack.emplace_back();
    } else if (event == json::parse_event_t::object_end) {
      key_stack.pop_back();
    } else if (event == json::parse_event_t::key) {
      const auto key = parsed.get<std::string>();
      if (!key_stack.back().insert(key).second)
        throw ConfigError("config key \"" + key + "\": duplicate");
    }
    return true;
  };

  json j;
  try {
    j = json::parse(text, cb);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  for (const auto& [key, value] : j.items())
    if (!kKnownKeys.count(key)) bad(key, "unknown key");

  RunConfig cfg;
  cfg.command = opt_string(j, "command", "");
  if (cfg.command.empty()) bad("command", "missing");
  bool known = false;
  for (const auto& c : known_commands()) known = known || c == cfg.command;
  if (!known) bad("command", "unknown command \"" + cfg.command + "\"");

  const bool is_verify = cfg.command == "verify";
  const bool is_shoot = cfg.command == "shoot-1d";
  const bool is_gamma_limit = cfg.command == "gamma-limit";
  const bool needs_alpha = cfg.command == "ground-state" || cfg.command == "spectrum" ||
                           cfg.command == "stability-condition" ||
                           cfg.command == "stability-experiment" || cfg.command == "decay-fit" ||
                           is_shoot;

  cfg.params.dim = int(opt_integer(j, "dim", (is_shoot || is_gamma_limit) ? 1 : 0));
  if (cfg.params.dim < 1 || cfg.params.dim > 3) bad("dim", "must be 1, 2 or 3");

  cfg.params.gamma = opt_number(j, "gamma", is_gamma_limit || is_shoot ? 1.0 : NAN);
  if (std::isnan(cfg.params.gamma)) bad("gamma", "missing");
  if (cfg.params.gamma < 0.0) bad("gamma", "must be >= 0");
  cfg.params.beta = need_number(j, "beta");
  cfg.params.sigma = need_number(j, "sigma");
  if (!(cfg.params.sigma > 0.0)) bad("sigma", "must be positive");

  if (j.contains("alpha")) {
    cfg.params.alpha = need_number(j, "alpha");
    cfg.has_alpha = true;
  } else if (needs_alpha) {
    bad("alpha", "missing (required by command " + cfg.command + ")");
  }

  if (j.contains("n") || j.contains("L")) {
    cfg.n = int(opt_integer(j, "n", 0));
    cfg.length = opt_number(j, "L", 0.0);
    if (cfg.n < 16) bad("n", "must be an even integer >= 16");
    if (cfg.n % 2 != 0) bad("n", "must be even");
    if (!(cfg.length > 0.0)) bad("L", "must be positive");
    cfg.has_grid = true;
  } else if (!is_verify && !is_shoot) {
    bad("n", "missing (grid required by command " + cfg.command + ")");
  }

  cfg.tol = opt_number(j, "tol", 1e-10);
  if (!(cfg.tol > 0.0)) bad("tol", "must be positive");
  cfg.max_iter = int(opt_integer(j, "max_iter", 2000));
  if (cfg.max_iter < 1) bad("max_iter", "must be >= 1");
  const double default_dt =
      (cfg.command == "evolve" || cfg.command == "stability-experiment") ? 1e-3 : 0.1;
  cfg.dt = opt_number(j, "dt", default_dt);
  if (!(cfg.dt > 0.0)) bad("dt", "must be positive");

  if (j.contains("mu")) {
    cfg.mu = need_number(j, "mu");
    if (!(cfg.mu > 0.0)) bad("mu", "must be positive");
    cfg.has_mu = true;
  } else if (cfg.command == "mass-min" || is_gamma_limit) {
    bad("mu", "missing (required by command " + cfg.command + ")");
  }

  if (cfg.command == "critical-mass") {
    cfg.mu_lo = need_number(j, "mu_lo");
    cfg.mu_hi = need_number(j, "mu_hi");
    if (!(cfg.mu_lo > 0.0)) bad("mu_lo", "must be positive");
    if (!(cfg.mu_hi > cfg.mu_lo)) bad("mu_hi", "must exceed mu_lo");
  }
  cfg.bisect_tol = opt_number(j, "bisect_tol", 0.05);
  if (!(cfg.bisect_tol > 0.0)) bad("bisect_tol", "must be positive");

  if (j.contains("gamma_list")) {
    if (!j["gamma_list"].is_array()) bad("gamma_list", "must be an array of numbers");
    for (const auto& v : j["gamma_list"]) {
      if (!v.is_number()) bad("gamma_list", "must be an array of numbers");
      cfg.gamma_list.push_back(v.get<double>());
    }
  } else if (is_gamma_limit) {
    bad("gamma_list", "missing (required by command gamma-limit)");
  }

  cfg.epsilon = opt_number(j, "epsilon", 1e-3);
  if (cfg.epsilon < 0.0) bad("epsilon", "must be >= 0");
  cfg.perturbation = opt_string(j, "perturbation", "scale");
  if (cfg.perturbation != "scale" && cfg.perturbation != "noise" &&
      cfg.perturbation != "modulated")
    bad("perturbation", "must be scale, noise or modulated");
  cfg.t_end = opt_number(j, "t_end", 10.0);
  if (!(cfg.t_end > 0.0)) bad("t_end", "must be positive");
  cfg.record_every = int(opt_integer(j, "record_every", 10));
  if (cfg.record_every < 1) bad("record_every", "must be >= 1");
  cfg.window_fraction = opt_number(j, "window_fraction", 0.5);
  if (!(cfg.window_fraction > 0.0 && cfg.window_fraction < 1.0))
    bad("window_fraction", "must be in (0, 1)");
  cfg.k_eigs = int(opt_integer(j, "k", 4));
  if (cfg.k_eigs < 1 || cfg.k_eigs > 10) bad("k", "must be in 1..10");

  if (j.contains("u0")) {
    cfg.u0 = need_number(j, "u0");
    cfg.has_u0 = true;
  }
  if (j.contains("upp0")) {
    cfg.upp0 = need_number(j, "upp0");
    cfg.has_upp0 = true;
  }
  if (is_shoot && (!cfg.has_u0 || !cfg.has_upp0))
    bad("u0", "u0 and upp0 are required by command shoot-1d");
  cfg.x_max = opt_number(j, "x_max", 30.0);
  if (!(cfg.x_max > 0.0)) bad("x_max", "must be positive");
  cfg.step = opt_number(j, "step", 1e-3);
  if (!(cfg.step > 0.0)) bad("step", "must be positive");

  cfg.field_path = opt_string(j, "field", "");
  if (is_verify && cfg.field_path.empty()) bad("field", "missing (required by command verify)");
  cfg.reference_path = opt_string(j, "reference", "");
  cfg.out_dir = opt_string(j, "out_dir", "out");
  const long seed = opt_integer(j, "seed", 1);
  if (seed < 0) bad("seed", "must be >= 0");
  cfg.seed = std::uint64_t(seed);
  cfg.threads = int(opt_integer(j, "threads", 1));
  if (cfg.threads < 1) bad("threads", "must be >= 1");

  // echo with defaults filled
  json echo = j;
  echo["tol"] = cfg.tol;
  echo["max_iter"] = cfg.max_iter;
  echo["dt"] = cfg.dt;
  echo["out_dir"] = cfg.out_dir;
  echo["seed"] = cfg.seed;
  echo["threads"] = cfg.threads;
  if (cfg.command == "stability-experiment") {
    echo["epsilon"] = cfg.epsilon;
    echo["perturbation"] = cfg.perturbation;
  }
  if (cfg.command == "evolve" || cfg.command == "stability-experiment") {
    echo["t_end"] = cfg.t_end;
    echo["record_every"] = cfg.record_every;
  }
  if (cfg.command == "decay-fit") echo["window_fraction"] = cfg.window_fraction;
  if (cfg.command == "spectrum") echo["k"] = cfg.k_eigs;
  if (cfg.command == "critical-mass") echo["bisect_tol"] = cfg.bisect_tol;
  if (is_shoot) {
    echo["x_max"] = cfg.x_max;
    echo["step"] = cfg.step;
  }
  cfg.echo = echo;
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace m4nls
