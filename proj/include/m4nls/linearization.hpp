#pragma once

#include <string>
#include <vector>

#include "m4nls/core.hpp"

namespace m4nls {

enum class LinearizedOp { L1, L2 };

/// L1 v = gamma Lap^2 v - beta Lap v + alpha v - (2 sigma + 1) |u*|^(2 sigma) v
/// L2 v = gamma Lap^2 v - beta Lap v + alpha v -            |u*|^(2 sigma) v
Field apply_linearized(const Field& u_star, const Field& v, const Params& p, LinearizedOp which);

struct SpectrumReport {
  LinearizedOp op = LinearizedOp::L1;
  std::vector<double> eigenvalues;      // ascending
  std::vector<double> eigen_residuals;  // ||A v - lambda v||_L2, unit L2 vectors
  std::vector<Field> eigenvectors;
  int n_negative = 0;
  int kernel_dim_est = 0;
  double kernel_tol = 0.0;
  std::string warning;  // set when u_star is far from a solution
};

struct EigenOptions {
  int max_iter = 600;
  double tol = 1e-9;        // target residual per reported pair
  double kernel_tol = 0.0;  // 0 = derive from the spectral gap
  unsigned seed = 12345;
};

/// k smallest eigenpairs of the symmetric linearized operator, computed by a
/// preconditioned block iteration (preconditioner = inverse of the constant
/// coefficient part, diagonal in spectral space).
SpectrumReport smallest_eigenpairs(const Field& u_star, const Params& p, LinearizedOp which,
                                   int k, const EigenOptions& opt = {});

struct NondegeneracyReport {
  int kernel_dim = 0;                   // |lambda| < kernel_tol count for L1
  int kernel_dim_beyond_translations = 0;
  double kernel_tol = 0.0;
  double spectral_gap = 0.0;            // smallest positive non-kernel eigenvalue
  std::string verdict;
};

/// Counts near-kernel directions of L1 and subtracts the N translation modes.
/// kernel_tol <= 0 selects the default 1e-6 * (smallest positive non-kernel
/// eigenvalue estimate). Errors when the tolerance is coarser than the gap.
NondegeneracyReport nondegeneracy_report(const Field& u_star, const Params& p,
                                         double kernel_tol = 0.0);

struct StabilityConditionResult {
  double integral = 0.0;        // <v, u*> for the deflated solution of L1 v = u*
  double solve_residual = 0.0;  // ||P(L1 v - u*)|| / ||u*||
  int kernel_dim = 0;
  int iterations = 0;
};

/// Solves L1 v = u* by preconditioned MINRES with the numerically computed
/// kernel of L1 projected out of the operator and the right-hand side, and
/// returns the sign-defining pairing integral. Errors when the right-hand
/// side has a relative kernel component above 1e-6.
StabilityConditionResult stability_condition(const Field& u_star, const Params& p);

}  // namespace m4nls
