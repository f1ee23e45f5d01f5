#pragma once

#include <optional>

#include "m4nls/core.hpp"

namespace m4nls {

/// Values of the variational functionals attached to a candidate profile.
struct FunctionalRecord {
  double energy = 0.0;    // E = gamma/2 |Lap u|^2 + beta/2 |grad u|^2 - lp/(2s+2)
  double mass = 0.0;      // integral |u|^2
  double quad_form = 0.0; // J = gamma |Lap u|^2 + beta |grad u|^2 + alpha |u|^2
  double action = 0.0;    // A = J/2 - lp/(2s+2)
  double lp_power = 0.0;  // integral |u|^(2s+2)
  bool has_alpha = false;
};

/// Evaluates E, mass, lp and, when alpha is supplied, J and A. Complex fields
/// use the modulus-based integrands.
FunctionalRecord evaluate(const Field& u, const Params& p,
                          std::optional<double> with_alpha = std::nullopt);

struct PohozaevReport {
  double defect = 0.0;    // 2 gamma |Lap|^2 + beta |grad|^2 - sN/(2s+2) lp
  double relative = 0.0;  // defect / sum of absolute values of the three terms
};

PohozaevReport pohozaev_residual(const Field& u, const Params& p);

struct LagrangeMultiplier {
  double alpha = 0.0;        // (lp - gamma |Lap|^2 - beta |grad|^2) / mu
  double alpha_energy = 0.0; // (-2E + s/(s+1) lp) / mu
  double mismatch = 0.0;     // relative difference of the two forms
};

/// Both formulas for the multiplier of the mass constraint |u|^2 = mu.
LagrangeMultiplier lagrange_multiplier(const Field& u, const Params& p, double mu);

struct RecoveredIntegrals {
  double lap_sq = 0.0;   // integral |Lap u|^2
  double grad_sq = 0.0;  // integral |grad u|^2
  double lp_power = 0.0; // integral |u|^(2s+2)
};

/// Recovers the three integrals of a constrained minimizer from its energy,
/// multiplier and mass by solving the 3x3 system {Euler-Lagrange identity,
/// Derrick-Pohozaev identity, energy}. At sigma*N == 2 (exact within 1e-12)
/// the degenerate closed relations are returned and a nonzero energy is
/// rejected.
RecoveredIntegrals recover_integrals(double energy_value, double alpha, double mu,
                                     const Params& p);

enum class GNForm { H2, H1, mixed };

/// Scale-invariant Gagliardo-Nirenberg ratio of the requested form; any
/// nonzero field yields a lower bound for the sharp constant.
double gn_ratio(const Field& u, double sigma, GNForm form);

/// Critical mass from the energy-threshold formula, with a supplied estimate
/// of the interpolation constant. Requires 2/N <= sigma < 4/N.
double critical_mass_formula(double gamma, double sigma, int N, double c_est);

/// Full identity suite evaluated on a candidate solution: multiplier,
/// Euler-Lagrange residual, Pohozaev defect, and recovery consistency.
struct IdentityReport {
  double pohozaev_residual = 0.0;  // relative form
  double el_residual = 0.0;
  double alpha = 0.0;
  RecoveredIntegrals recovered;
  double defect_lap = 0.0;   // relative errors between recovered and measured
  double defect_grad = 0.0;
  double defect_lp = 0.0;
};

IdentityReport identity_report(const Field& u, const Params& p);

}  // namespace m4nls
