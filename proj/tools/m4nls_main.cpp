#include <CLI11.hpp>

#include <iostream>

#include "m4nls/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"m4nls: spectral laboratory for standing waves of the mixed-dispersion "
               "fourth-order nonlinear Schroedinger equation"};
  std::string config_path;
  std::string out_override;
  int threads = 0;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--threads", threads, "concurrent sweep jobs (default 1)");
  CLI11_PARSE(app, argc, argv);

  try {
    m4nls::RunConfig cfg = m4nls::parse_config(config_path);
    if (!out_override.empty()) {
      cfg.out_dir = out_override;
      cfg.echo["out_dir"] = out_override;
    }
    if (threads > 0) {
      cfg.threads = threads;
      cfg.echo["threads"] = threads;
    }
    return m4nls::run(cfg, std::cout);
  } catch (const m4nls::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
