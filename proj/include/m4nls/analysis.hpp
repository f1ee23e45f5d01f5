#pragma once

#include <string>
#include <vector>

#include "m4nls/core.hpp"
#include "m4nls/solvers.hpp"

namespace m4nls {

enum class DecayRegime { beta_gt, beta_eq, beta_lt };

struct RateResult {
  double rate = 0.0;
  DecayRegime regime = DecayRegime::beta_gt;
};

/// Exponential decay rate of solutions in the unit fourth-order frame:
///   beta > 2 sqrt(alpha):  sqrt(beta - sqrt(beta^2 - 4 alpha)) / sqrt(2)
///   |beta| < 2 sqrt(alpha): sqrt(2 sqrt(alpha) - beta) / 2
///   beta = 2 sqrt(alpha):  sqrt(beta)
/// Requires alpha > 0 and beta > -2 sqrt(alpha).
RateResult theoretical_rate(double alpha, double beta);

struct DecayFit {
  double fitted_rate = 0.0;  // decay per unit length (positive)
  double r_min = 0.0, r_max = 0.0;
  double r_squared = 0.0;
  double theoretical = 0.0;
  DecayRegime regime = DecayRegime::beta_gt;
  bool non_exponential = false;  // r^2 < 0.99 over the window
  int samples = 0;
};

/// Least-squares slope of log|u| against radius over the outer window
/// [(1 - window_fraction) r_max, r_max], dropping samples below 1e-12.
/// In the oscillatory regime (|beta| < 2 sqrt(alpha)) the fit runs on the
/// local maxima of |u| along the positive axis instead. alpha/beta are the
/// coefficients in the frame of u (rescale first when gamma != 1).
DecayFit fit_decay_rate(const Field& u, double alpha, double beta, double window_fraction);

/// Convenience wrapper: moves u to the unit fourth-order frame via
/// rescale_gamma and fits there.
DecayFit decay_fit_study(const Field& u, const Params& p, double window_fraction);

struct SignReport {
  int n_sign_changes_radial = 0;
  double min_over_max = 0.0;
  std::string classification;  // "positive" or "sign_changing"
  bool matches_threshold = false;  // agreement with the beta^2 vs 4 gamma alpha split
};

/// Counts sign changes along the radial axis through the peak after
/// normalizing the peak sign, and cross-checks against the coefficient
/// threshold beta >= 2 sqrt(gamma alpha).
SignReport sign_report(const Field& u, const Params& p);

struct CriticalMassResult {
  double mu_c_est = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  std::vector<std::pair<double, bool>> probes;  // (mu, negative-energy found)
  bool monotone = true;
  std::string note;
};

struct CriticalMassOptions {
  double bisect_tol = 0.05;  // relative bracket width
  int grid_n = 256;
  double grid_length = 40.0;
  GradientFlowOptions flow;
};

/// Bisection on "the normalized gradient flow finds energy < -1e-9".
/// For sigma < 2/N the infimum is negative for every mass and the search
/// returns 0 with a note.
CriticalMassResult critical_mass_search(const Params& p, double mu_lo, double mu_hi,
                                        const CriticalMassOptions& opt = {});

struct GammaLimitRow {
  double gamma = 0.0;
  double err_l2 = 0.0;
  double err_h1 = 0.0;
  double err_h2 = 0.0;
  double alpha = 0.0;
  double gamma_lap = 0.0;  // gamma * integral |Lap u_gamma|^2
};

struct GammaLimitOptions {
  int grid_n = 512;
  double grid_length = 60.0;
  int threads = 1;
  GradientFlowOptions flow;
};

/// Mass-constrained minimizers along a decreasing gamma sequence, compared
/// with the second-order limit profile (computed at gamma = 0, aligned by
/// peak and sign).
std::vector<GammaLimitRow> gamma_limit_study(double beta, double mu, double sigma,
                                             const std::vector<double>& gamma_list,
                                             const GammaLimitOptions& opt = {});

struct ShootState {
  double x = 0.0;
  double u = 0.0, up = 0.0, upp = 0.0, uppp = 0.0;
  double hamiltonian = 0.0;
};

enum class ShootOutcome { decayed, diverged, undecided };

struct ShootResult {
  std::vector<ShootState> trajectory;  // decimated
  double h_drift = 0.0;                // max |H - H(0)| along the run
  ShootOutcome outcome = ShootOutcome::undecided;
  double stopped_at = 0.0;
};

struct ShootOptions {
  double divergence_threshold = 1e3;
  double decay_threshold = 1e-8;
  int record_every = 100;
};

/// Even-data shooting for the 1d profile equation u'''' - beta u'' + alpha u
/// = |u|^(2 sigma) u, integrated as the factorized second-order system
/// {u'' - lambda1 u = w, w'' - lambda2 w = |u|^(2 sigma) u} with
/// lambda1 lambda2 = alpha, lambda1 + lambda2 = beta (requires
/// beta >= 2 sqrt(alpha)). Classical RK4 with fixed step, carried out in
/// extended precision because the homoclinic orbit is exponentially unstable.
/// Outcome: diverged when |u| crosses the divergence threshold, decayed when
/// |u| dips below the decay threshold in the second half of [0, x_max]
/// without ever diverging.
ShootResult shoot_1d(const Params& p, double u0, double upp0, double x_max, double step,
                     const ShootOptions& opt = {});

/// Suggested box length so that the predicted exponential tail drops below
/// 1e-12 at the boundary (in the frame of the given coefficients).
double default_box_length(const Params& p);

}  // namespace m4nls
