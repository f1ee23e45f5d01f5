#include "m4nls/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <vector>

#include "m4nls/analysis.hpp"
#include "m4nls/evolution.hpp"
#include "m4nls/field_io.hpp"
#include "m4nls/functionals.hpp"
#include "m4nls/linearization.hpp"
#include "m4nls/solvers.hpp"

namespace m4nls {

namespace {

namespace fs = std::filesystem;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class RunDir {
 public:
  RunDir(const RunConfig& cfg, std::ostream& log) : cfg_(cfg), log_(log) {
    fs::create_directories(cfg.out_dir);
    start_ = std::chrono::steady_clock::now();
  }

  std::string path(const std::string& name) const { return (fs::path(cfg_.out_dir) / name).string(); }

  std::ofstream open_csv(const std::string& name) {
    outputs_.push_back(name);
    std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file " + path(name));
    return out;
  }

  void note_output(const std::string& name) { outputs_.push_back(name); }
  void flag(const std::string& f) { flags_.push_back(f); }

  void write_manifest(const std::string& error = "") {
    nlohmann::json manifest;
    manifest["artifact_version"] = kArtifactVersion;
    manifest["command"] = cfg_.command;
    manifest["config"] = cfg_.echo;
    manifest["determinism"] =
        "grid transforms are single-threaded and bitwise deterministic; threads > 1 only "
        "dispatches independent sweep jobs whose results are assembled in input order";
    manifest["flags"] = flags_;
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    manifest["wall_time_s"] = std::chrono::duration<double>(elapsed).count();
    nlohmann::json sums = nlohmann::json::object();
    for (const auto& name : outputs_) sums[name] = file_checksum(path(name));
    manifest["outputs"] = sums;
    if (!error.empty()) manifest["error"] = error;
    std::ofstream out(path("run_manifest.json"), std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << "\n";
    log_ << "wrote " << path("run_manifest.json") << "\n";
  }

 private:
  const RunConfig& cfg_;
  std::ostream& log_;
  std::vector<std::string> outputs_;
  std::vector<std::string> flags_;
  std::chrono::steady_clock::time_point start_;
};

GridPtr grid_from(const RunConfig& cfg) { return make_grid(cfg.params.dim, cfg.n, cfg.length); }

GroundStateResult solve_ground_state(const RunConfig& cfg) {
  auto grid = grid_from(cfg);
  PetviashviliOptions opt;
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  return petviashvili_solve(cfg.params, gaussian_init(cfg.params, grid), opt);
}

/// profile from `field` when given, otherwise a fresh Petviashvili solve
Field profile_for(const RunConfig& cfg, RunDir& dir) {
  if (!cfg.field_path.empty()) {
    Field f = load_field(cfg.field_path);
    if (f.grid->dim() != cfg.params.dim)
      throw ConfigError("loaded field dimension does not match config dim");
    return f;
  }
  (void)dir;
  return solve_ground_state(cfg).profile;
}

void write_ground_state_outputs(RunDir& dir, const RunConfig& cfg, const GroundStateResult& r) {
  save_field(dir.path("profile.field"), r.profile);
  dir.note_output("profile.field");
  auto csv = dir.open_csv("summary.csv");
  csv << "converged,iterations,el_residual,alpha,mass,stabilizing_factor,energy,quad_form,"
         "action,lp_power,pohozaev_rel,note\n";
  const auto poh = pohozaev_residual(r.profile, r.params);
  csv << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << g17(r.el_residual) << ','
      << g17(r.alpha) << ',' << g17(r.mass) << ',' << g17(r.stabilizing_factor) << ','
      << g17(r.functionals.energy) << ',' << g17(r.functionals.quad_form) << ','
      << g17(r.functionals.action) << ',' << g17(r.functionals.lp_power) << ','
      << g17(poh.relative) << ',' << r.note << '\n';
}

int run_ground_state(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  GroundStateResult r = solve_ground_state(cfg);
  write_ground_state_outputs(dir, cfg, r);
  log << "ground state: " << r.iterations << " iterations, residual " << r.el_residual << "\n";
  return 0;
}

int run_mass_min(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  auto grid = grid_from(cfg);
  GradientFlowOptions opt;
  opt.dt = cfg.dt;
  opt.max_iter = cfg.max_iter;
  Params seed = cfg.params;
  if (seed.alpha <= 0.0) seed.alpha = 1.0;
  GroundStateResult r = normalized_gradient_flow(cfg.params, cfg.mu, gaussian_init(seed, grid), opt);
  write_ground_state_outputs(dir, cfg, r);
  log << "mass-constrained minimizer: " << r.iterations << " iterations, energy "
      << r.functionals.energy << ", alpha " << r.alpha << "\n";
  if (!r.converged && r.note == "no negative-energy minimizer detected") {
    dir.flag(r.note);
    log << r.note << "\n";
  }
  return 0;
}

int run_spectrum(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  Field u = profile_for(cfg, dir);
  Params p = cfg.params;
  auto csv = dir.open_csv("eigen.csv");
  csv << "operator,index,lambda,residual\n";
  for (auto which : {LinearizedOp::L1, LinearizedOp::L2}) {
    SpectrumReport rep = smallest_eigenpairs(u, p, which, cfg.k_eigs);
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
      csv << (which == LinearizedOp::L1 ? "L1" : "L2") << ',' << i << ','
          << g17(rep.eigenvalues[i]) << ',' << g17(rep.eigen_residuals[i]) << '\n';
    if (!rep.warning.empty()) dir.flag(rep.warning);
    log << (which == LinearizedOp::L1 ? "L1" : "L2") << ": " << rep.n_negative
        << " negative, kernel dim " << rep.kernel_dim_est << " at tol " << rep.kernel_tol << "\n";
  }
  return 0;
}

int run_stability_condition(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  Field u = profile_for(cfg, dir);
  auto res = stability_condition(u, cfg.params);
  auto csv = dir.open_csv("stability.csv");
  csv << "integral,solve_residual,kernel_dim,iterations,negative\n";
  csv << g17(res.integral) << ',' << g17(res.solve_residual) << ',' << res.kernel_dim << ','
      << res.iterations << ',' << (res.integral < 0.0 ? 1 : 0) << '\n';
  log << "stability condition integral = " << res.integral << " (residual "
      << res.solve_residual << ")\n";
  return 0;
}

void write_trace_csv(std::ofstream& csv, const StabilityTrace& trace) {
  const bool with_distance = !trace.orbital_distance.empty();
  csv << "t,mass,energy";
  if (with_distance) csv << ",orbital_distance";
  csv << '\n';
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    csv << g17(trace.times[i]) << ',' << g17(trace.mass[i]) << ',' << g17(trace.energy[i]);
    if (with_distance) csv << ',' << g17(trace.orbital_distance[i]);
    csv << '\n';
  }
}

int run_evolve(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  Field psi0 = profile_for(cfg, dir);
  std::optional<Field> reference;
  if (!cfg.reference_path.empty()) reference = load_field(cfg.reference_path);
  EvolveOptions opt;
  opt.dt = cfg.dt;
  opt.t_end = cfg.t_end;
  opt.record_every = cfg.record_every;
  EvolveResult res =
      split_step_evolve(psi0, cfg.params, opt, reference ? &*reference : nullptr);
  if (res.blowup_possible) dir.flag("blow-up possible");
  if (res.aborted) dir.flag("aborted: NaN detected at t=" + g17(res.aborted_at));
  auto csv = dir.open_csv("trace.csv");
  write_trace_csv(csv, res.trace);
  save_field(dir.path("final.field"), res.final_state);
  dir.note_output("final.field");
  log << "evolved to t=" << (res.aborted ? res.aborted_at : cfg.t_end) << ", recorded "
      << res.trace.times.size() << " samples\n";
  return res.aborted ? 2 : 0;
}

int run_stability_experiment(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  GroundStateResult gs = solve_ground_state(cfg);
  PerturbationSpec pert;
  pert.kind = cfg.perturbation == "scale"   ? PerturbationKind::scale
              : cfg.perturbation == "noise" ? PerturbationKind::noise
                                            : PerturbationKind::modulated;
  pert.epsilon = cfg.epsilon;
  pert.seed = cfg.seed;
  auto res = stability_experiment(gs.profile, cfg.params, pert, cfg.t_end, cfg.dt,
                                  cfg.record_every);
  auto csv = dir.open_csv("trace.csv");
  write_trace_csv(csv, res.trace);
  auto verdict = dir.open_csv("verdict.csv");
  verdict << "perturbation,epsilon,sup_distance,fitted_constant\n";
  verdict << cfg.perturbation << ',' << g17(cfg.epsilon) << ',' << g17(res.sup_distance) << ','
          << g17(res.fitted_constant) << '\n';
  log << "stability experiment: " << res.verdict << "\n";
  return 0;
}

int run_decay_fit(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  Field u = profile_for(cfg, dir);
  Params p = cfg.params;
  if (!cfg.field_path.empty() && !cfg.has_alpha)
    throw ConfigError("decay-fit on a loaded field requires alpha");
  DecayFit fit = decay_fit_study(u, p, cfg.window_fraction);
  auto csv = dir.open_csv("fit.csv");
  csv << "fitted_rate,theoretical_rate,regime,r_min,r_max,r_squared,samples,non_exponential\n";
  const char* regime = fit.regime == DecayRegime::beta_gt   ? "beta_gt"
                       : fit.regime == DecayRegime::beta_eq ? "beta_eq"
                                                            : "beta_lt";
  csv << g17(fit.fitted_rate) << ',' << g17(fit.theoretical) << ',' << regime << ','
      << g17(fit.r_min) << ',' << g17(fit.r_max) << ',' << g17(fit.r_squared) << ','
      << fit.samples << ',' << (fit.non_exponential ? 1 : 0) << '\n';
  if (fit.non_exponential) dir.flag("non-exponential");
  log << "decay fit: rate " << fit.fitted_rate << " vs theoretical " << fit.theoretical << "\n";
  return 0;
}

int run_critical_mass(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  CriticalMassOptions opt;
  opt.bisect_tol = cfg.bisect_tol;
  opt.grid_n = cfg.n;
  opt.grid_length = cfg.length;
  auto res = critical_mass_search(cfg.params, cfg.mu_lo, cfg.mu_hi, opt);
  auto probes = dir.open_csv("probes.csv");
  probes << "mu,negative_energy\n";
  for (const auto& [mu, neg] : res.probes) probes << g17(mu) << ',' << (neg ? 1 : 0) << '\n';
  auto csv = dir.open_csv("result.csv");
  csv << "mu_c_est,bracket_lo,bracket_hi,monotone,note\n";
  csv << g17(res.mu_c_est) << ',' << g17(res.bracket_lo) << ',' << g17(res.bracket_hi) << ','
      << (res.monotone ? 1 : 0) << ',' << res.note << '\n';
  log << "critical mass estimate " << res.mu_c_est << " in [" << res.bracket_lo << ", "
      << res.bracket_hi << "]\n";
  return 0;
}

int run_gamma_limit(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  GammaLimitOptions opt;
  opt.grid_n = cfg.n;
  opt.grid_length = cfg.length;
  opt.threads = cfg.threads;
  auto rows = gamma_limit_study(cfg.params.beta, cfg.mu, cfg.params.sigma, cfg.gamma_list, opt);
  auto csv = dir.open_csv("table.csv");
  csv << "gamma,err_l2,err_h1,err_h2,alpha,gamma_lap\n";
  for (const auto& r : rows)
    csv << g17(r.gamma) << ',' << g17(r.err_l2) << ',' << g17(r.err_h1) << ',' << g17(r.err_h2)
        << ',' << g17(r.alpha) << ',' << g17(r.gamma_lap) << '\n';
  log << "gamma-limit study: " << rows.size() << " rows\n";
  return 0;
}

int run_shoot(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  ShootOptions opt;
  opt.record_every = cfg.record_every;
  auto res = shoot_1d(cfg.params, cfg.u0, cfg.upp0, cfg.x_max, cfg.step, opt);
  auto traj = dir.open_csv("trajectory.csv");
  traj << "x,u,up,upp,uppp,hamiltonian\n";
  for (const auto& st : res.trajectory)
    traj << g17(st.x) << ',' << g17(st.u) << ',' << g17(st.up) << ',' << g17(st.upp) << ','
         << g17(st.uppp) << ',' << g17(st.hamiltonian) << '\n';
  auto csv = dir.open_csv("result.csv");
  csv << "outcome,h_drift,stopped_at\n";
  const char* outcome = res.outcome == ShootOutcome::decayed    ? "decayed"
                        : res.outcome == ShootOutcome::diverged ? "diverged"
                                                                : "undecided";
  csv << outcome << ',' << g17(res.h_drift) << ',' << g17(res.stopped_at) << '\n';
  log << "shoot: " << outcome << ", Hamiltonian drift " << res.h_drift << "\n";
  return 0;
}

int run_verify(const RunConfig& cfg, RunDir& dir, std::ostream& log) {
  Field u = load_field(cfg.field_path);
  Params p = cfg.params;
  if (u.grid->dim() != p.dim) throw ConfigError("verify: field dimension does not match dim");
  IdentityReport rep = identity_report(u, p);
  auto csv = dir.open_csv("report.csv");
  csv << "alpha,el_residual,pohozaev_rel,defect_lap,defect_grad,defect_lp\n";
  csv << g17(rep.alpha) << ',' << g17(rep.el_residual) << ',' << g17(rep.pohozaev_residual)
      << ',' << g17(rep.defect_lap) << ',' << g17(rep.defect_grad) << ',' << g17(rep.defect_lp)
      << '\n';
  const double tol = 1e-6;
  const bool ok = rep.el_residual < tol && std::abs(rep.pohozaev_residual) < tol &&
                  rep.defect_lap < tol && rep.defect_grad < tol && rep.defect_lp < tol;
  log << "verify: alpha " << rep.alpha << ", el residual " << rep.el_residual
      << ", pohozaev " << rep.pohozaev_residual << (ok ? " [ok]" : " [defects above tolerance]")
      << "\n";
  if (!ok) dir.flag("identity defects above tolerance");
  return ok ? 0 : 2;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  RunDir dir(cfg, log);
  int code = 0;
  std::string error;
  try {
    if (cfg.command == "ground-state") code = run_ground_state(cfg, dir, log);
    else if (cfg.command == "mass-min") code = run_mass_min(cfg, dir, log);
    else if (cfg.command == "spectrum") code = run_spectrum(cfg, dir, log);
    else if (cfg.command == "stability-condition") code = run_stability_condition(cfg, dir, log);
    else if (cfg.command == "evolve") code = run_evolve(cfg, dir, log);
    else if (cfg.command == "stability-experiment") code = run_stability_experiment(cfg, dir, log);
    else if (cfg.command == "decay-fit") code = run_decay_fit(cfg, dir, log);
    else if (cfg.command == "critical-mass") code = run_critical_mass(cfg, dir, log);
    else if (cfg.command == "gamma-limit") code = run_gamma_limit(cfg, dir, log);
    else if (cfg.command == "shoot-1d") code = run_shoot(cfg, dir, log);
    else if (cfg.command == "verify") code = run_verify(cfg, dir, log);
    else throw ConfigError("unknown command " + cfg.command);
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    error = e.what();
    code = 2;
  }
  dir.write_manifest(error);
  return code;
}

}  // namespace m4nls
