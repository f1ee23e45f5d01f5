#pragma once

#include <limits>
#include <string>

#include "m4nls/core.hpp"
#include "m4nls/functionals.hpp"

namespace m4nls {

/// Converged (or failed) standing-wave computation.
struct GroundStateResult {
  Field profile;
  Params params;          // includes the frequency alpha actually in force
  double alpha = 0.0;     // prescribed (Petviashvili) or recovered (mass flow)
  double mass = 0.0;
  double el_residual = 0.0;
  int iterations = 0;
  FunctionalRecord functionals;
  bool converged = false;
  double stabilizing_factor = 0.0;  // Petviashvili S at the last iterate
  std::string note;
};

struct PetviashviliOptions {
  double tol = 1e-10;
  int max_iter = 2000;
  // S wandering outside [lo, hi] counts as divergence once past the warmup.
  double guard_lo = 1e-3;
  double guard_hi = 1e3;
};

/// Stabilized fixed point u <- S^theta * (gamma Lap^2 - beta Lap + alpha)^{-1}
/// (|u|^(2 sigma) u) with S = <Lu,u>/<|u|^(2s)u,u> and theta = (2s+1)/(2s).
/// Requires alpha > 0 and a positive symbol; init must be nonzero.
GroundStateResult petviashvili_solve(const Params& p, const Field& init,
                                     const PetviashviliOptions& opt = {});

struct GradientFlowOptions {
  double dt = 0.1;          // initial step, halved on energy increase
  double dt_floor = 1e-6;
  double tol = 1e-12;       // relative energy stationarity
  int max_iter = 20000;
  double el_tol = 1e-6;     // residual bound for the converged flag
  int flat_steps_limit = 500;  // steps with E > -1e-10 before giving up
  // optional early exit once the energy falls below this level (used by the
  // critical-mass indicator, where only the sign of the infimum matters)
  double stop_below_energy = -std::numeric_limits<double>::infinity();
};

/// Discrete normalized gradient flow for the mass-constrained minimizer:
/// semi-implicit step then rescale to mass mu. Rejects sigma >= 4/N.
/// When the energy never drops below -1e-10 for flat_steps_limit accepted
/// steps, returns with converged=false and note
/// "no negative-energy minimizer detected".
GroundStateResult normalized_gradient_flow(const Params& p, double mu, const Field& init,
                                           const GradientFlowOptions& opt = {});

/// Fourier rearrangement: inverse transform of the symmetric-decreasing
/// rearrangement of |u^|. Preserves mass exactly; does not increase the
/// gradient or Laplacian norms; output is real, even, with nonnegative
/// spectral coefficients.
Field fourier_rearrange(const Field& u);

struct RescaleResult {
  Field field;   // v(x) = u(gamma^{1/4} x) on the box of length L*gamma^{-1/4}
  double theta;  // beta / sqrt(gamma)
};

/// Moves a profile from the (gamma, beta) frame to the normalized frame with
/// unit fourth-order coefficient. The samples are reused exactly; only the
/// box length changes.
RescaleResult rescale_gamma(const Field& u, double gamma, double beta);

/// Closed-form 1d soliton of -u'' + alpha u = |u|^(2 sigma) u:
/// u(x) = ((sigma+1) alpha)^(1/(2 sigma)) sech^(1/sigma)(sigma sqrt(alpha) x).
Field nls_soliton(double alpha, double sigma, const GridPtr& grid);

/// Default Petviashvili seed: centered Gaussian with the soliton amplitude
/// and width scaling in alpha.
Field gaussian_init(const Params& p, const GridPtr& grid);

/// Sub-grid peak position via parabolic interpolation through the three
/// samples around max|u| (ties broken toward the smallest coordinate).
/// 1d helper; returns the physical coordinate.
double peak_position_1d(const Field& u);

/// Relative L-infinity difference between two 1d profiles after shifting b so
/// the peaks coincide (spectral shift) and normalizing signs.
double aligned_linf_diff(const Field& a, const Field& b);

/// Translates a field by r (per axis) using the spectral phase shift.
Field translate(const Field& u, const double r[3]);

}  // namespace m4nls
