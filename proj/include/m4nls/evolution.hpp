#pragma once

#include <optional>
#include <string>
#include <vector>

#include "m4nls/core.hpp"

namespace m4nls {

/// Time series of conserved quantities and orbital distance along a run.
struct StabilityTrace {
  std::vector<double> times;
  std::vector<double> mass;              // integral |psi|^2
  std::vector<double> energy;            // E_{gamma,beta}(psi)
  std::vector<double> orbital_distance;  // empty unless a reference was given
  Params params;
  std::string perturbation_descriptor;
};

struct EvolveResult {
  StabilityTrace trace;
  Field final_state;
  bool aborted = false;        // NaN detected; final_state is the last good one
  double aborted_at = 0.0;
  bool blowup_possible = false;  // sigma >= 4/N run
};

struct EvolveOptions {
  double dt = 1e-3;
  double t_end = 10.0;
  int record_every = 10;
};

/// Strang splitting for i psi_t - gamma Lap^2 psi + beta Lap psi
/// + |psi|^(2 sigma) psi = 0. Both substeps are exact: the linear half-step
/// is a spectral phase, the nonlinear step is a pointwise phase rotation.
/// When `reference` is given the trace records the orbital distance to it.
EvolveResult split_step_evolve(const Field& psi0, const Params& p, const EvolveOptions& opt,
                               const Field* reference = nullptr);

struct OrbitalDistanceResult {
  double distance = 0.0;
  double theta = 0.0;   // optimal phase
  double shift[3] = {0.0, 0.0, 0.0};  // optimal translation
};

/// d(psi, U) = inf over phase and translation of ||psi - e^{i theta} U(. - r)||_H2.
/// The phase minimization is closed-form; the translation is located by a
/// cross-correlation argmax over grid shifts and refined by golden-section
/// search to 1e-4 of a cell.
OrbitalDistanceResult orbital_distance_full(const Field& psi, const Field& u);
double orbital_distance(const Field& psi, const Field& u);

enum class PerturbationKind { scale, noise, modulated };

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::scale;
  double epsilon = 1e-3;
  std::uint64_t seed = 1;
};

struct StabilityExperimentResult {
  StabilityTrace trace;
  double sup_distance = 0.0;
  double fitted_constant = 0.0;  // sup distance / epsilon
  std::string verdict;
};

/// Perturbs a standing-wave profile, evolves it, and tracks the orbital
/// distance to the unperturbed profile.
StabilityExperimentResult stability_experiment(const Field& u, const Params& p,
                                               const PerturbationSpec& pert, double t_end,
                                               double dt, int record_every = 20);

/// Applies a perturbation to a profile (exposed for tests and the CLI).
Field apply_perturbation(const Field& u, const PerturbationSpec& pert);

}  // namespace m4nls
