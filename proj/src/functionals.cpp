#include "m4nls/functionals.hpp"

#include <cmath>
#include <sstream>

namespace m4nls {

FunctionalRecord evaluate(const Field& u, const Params& p, std::optional<double> with_alpha) {
  check_finite(u, "evaluate");
  const auto sp = sobolev_products(u);
  const double lp = integrate_abs_pow(u, 2.0 * p.sigma + 2.0);
  FunctionalRecord rec;
  rec.mass = sp.l2_sq;
  rec.lp_power = lp;
  rec.energy = 0.5 * p.gamma * sp.lap_l2_sq + 0.5 * p.beta * sp.grad_l2_sq -
               lp / (2.0 * p.sigma + 2.0);
  if (with_alpha) {
    rec.has_alpha = true;
    rec.quad_form = p.gamma * sp.lap_l2_sq + p.beta * sp.grad_l2_sq + *with_alpha * sp.l2_sq;
    rec.action = 0.5 * rec.quad_form - lp / (2.0 * p.sigma + 2.0);
  }
  return rec;
}

PohozaevReport pohozaev_residual(const Field& u, const Params& p) {
  const auto sp = sobolev_products(u);
  const double lp = integrate_abs_pow(u, 2.0 * p.sigma + 2.0);
  const double t1 = 2.0 * p.gamma * sp.lap_l2_sq;
  const double t2 = p.beta * sp.grad_l2_sq;
  const double t3 = (p.sigma * p.dim / (2.0 * p.sigma + 2.0)) * lp;
  PohozaevReport rep;
  rep.defect = t1 + t2 - t3;
  const double scale = std::abs(t1) + std::abs(t2) + std::abs(t3);
  rep.relative = scale == 0.0 ? 0.0 : rep.defect / scale;
  return rep;
}

LagrangeMultiplier lagrange_multiplier(const Field& u, const Params& p, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("lagrange_multiplier: mu must be positive");
  const auto sp = sobolev_products(u);
  const double lp = integrate_abs_pow(u, 2.0 * p.sigma + 2.0);
  const double energy = 0.5 * p.gamma * sp.lap_l2_sq + 0.5 * p.beta * sp.grad_l2_sq -
                        lp / (2.0 * p.sigma + 2.0);
  LagrangeMultiplier lm;
  lm.alpha = (lp - p.gamma * sp.lap_l2_sq - p.beta * sp.grad_l2_sq) / mu;
  lm.alpha_energy = (-2.0 * energy + p.sigma / (p.sigma + 1.0) * lp) / mu;
  const double scale = std::max({std::abs(lm.alpha), std::abs(lm.alpha_energy), 1e-300});
  lm.mismatch = std::abs(lm.alpha - lm.alpha_energy) / scale;
  return lm;
}

RecoveredIntegrals recover_integrals(double energy_value, double alpha, double mu,
                                     const Params& p) {
  const double s = p.sigma;
  const double N = p.dim;
  const double twoS2 = 2.0 * s + 2.0;
  RecoveredIntegrals out;
  if (std::abs(s * N - 2.0) < 1e-12) {
    // Degenerate branch: the closed relations hold only on the zero energy
    // level; lp = (s+1)/s * alpha * mu and lp = (s+1) * beta * grad.
    if (std::abs(energy_value) > 1e-12 * std::max(1.0, std::abs(alpha * mu)))
      throw NumericalError("recover_integrals: sigma*N = 2 with nonzero energy");
    out.lp_power = (s + 1.0) / s * alpha * mu;
    out.grad_sq = p.beta == 0.0 ? 0.0 : out.lp_power / ((s + 1.0) * p.beta);
    out.lap_sq = 0.0;
    return out;
  }
  // Rows in unknowns (lap_sq, grad_sq, lp_power):
  //   Euler-Lagrange:  gamma*D + beta*G - P           = -alpha*mu
  //   Pohozaev:        2*gamma*D + beta*G - sN/(2s+2)*P = 0
  //   energy:          gamma/2*D + beta/2*G - P/(2s+2)  = E
  const double a[3][3] = {{p.gamma, p.beta, -1.0},
                          {2.0 * p.gamma, p.beta, -s * N / twoS2},
                          {0.5 * p.gamma, 0.5 * p.beta, -1.0 / twoS2}};
  const double rhs[3] = {-alpha * mu, 0.0, energy_value};

  double m[3][4];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = a[i][j];
    m[i][3] = rhs[i];
  }
  // Gaussian elimination with partial pivoting on the tiny system.
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (std::abs(m[piv][c]) < 1e-14) {
      std::ostringstream os;
      os << "recover_integrals: singular identity system (gamma=" << p.gamma
         << ", beta=" << p.beta << ", sigma=" << s << ", N=" << N << ")";
      throw NumericalError(os.str());
    }
    if (piv != c)
      for (int j = 0; j < 4; ++j) std::swap(m[c][j], m[piv][j]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int j = c; j < 4; ++j) m[r][j] -= f * m[c][j];
    }
  }
  out.lap_sq = m[0][3] / m[0][0];
  out.grad_sq = m[1][3] / m[1][1];
  out.lp_power = m[2][3] / m[2][2];
  return out;
}

double gn_ratio(const Field& u, double sigma, GNForm form) {
  const int N = u.grid->dim();
  if (!(sigma > 0.0)) throw std::invalid_argument("gn_ratio: sigma must be positive");
  switch (form) {
    case GNForm::H2:
      if (N > 4 && sigma > 4.0 / (N - 4)) throw std::invalid_argument("gn_ratio: sigma out of range for H2 form");
      break;
    case GNForm::H1:
      if (N > 2 && sigma > 2.0 / (N - 2)) throw std::invalid_argument("gn_ratio: sigma out of range for H1 form");
      break;
    case GNForm::mixed:
      if (!(sigma > 2.0 / N && sigma < 4.0 / N))
        throw std::invalid_argument("gn_ratio: mixed form requires 2/N < sigma < 4/N");
      break;
  }
  const auto sp = sobolev_products(u);
  if (sp.l2_sq == 0.0) throw std::invalid_argument("gn_ratio: zero field");
  const double lp = integrate_abs_pow(u, 2.0 * sigma + 2.0);
  const double sN = sigma * N;
  switch (form) {
    case GNForm::H2:
      // lp <= B * ||Lap u||^(sN/2) * ||u||^(2 + 2 sigma - sN/2)
      return lp / (std::pow(sp.lap_l2_sq, sN / 4.0) *
                   std::pow(sp.l2_sq, (2.0 + 2.0 * sigma - sN / 2.0) / 2.0));
    case GNForm::H1:
      // lp <= C * ||grad u||^(sN) * ||u||^(2 + sigma (2 - N))
      return lp / (std::pow(sp.grad_l2_sq, sN / 2.0) *
                   std::pow(sp.l2_sq, (2.0 + sigma * (2.0 - N)) / 2.0));
    case GNForm::mixed:
      // lp <= C * (|u|^2)^sigma * (|grad u|^2)^((4-sN)/2) * (|Lap u|^2)^(sN/2-1)
      return lp / (std::pow(sp.l2_sq, sigma) * std::pow(sp.grad_l2_sq, (4.0 - sN) / 2.0) *
                   std::pow(sp.lap_l2_sq, sN / 2.0 - 1.0));
  }
  return 0.0;
}

double critical_mass_formula(double gamma, double sigma, int N, double c_est) {
  if (!(c_est > 0.0)) throw std::invalid_argument("critical_mass_formula: constant must be positive");
  const double sN = sigma * N;
  if (!(sN >= 2.0 - 1e-12 && sN < 4.0))
    throw std::invalid_argument("critical_mass_formula: requires 2/N <= sigma < 4/N");
  if (std::abs(sN - 2.0) < 1e-12) return std::pow(1.0 / (2.0 * c_est), N / 2.0);
  const double V = gamma * (1.0 / (sN - 2.0) - 0.5) * std::pow(c_est, 2.0 / (4.0 - sN)) *
                   std::pow(gamma * (2.0 * sigma + 2.0) / (sN - 2.0), 2.0 / (sN - 4.0));
  return std::pow(1.0 / (2.0 * V), (4.0 - sN) / (2.0 * sigma));
}

IdentityReport identity_report(const Field& u, const Params& p) {
  IdentityReport rep;
  const auto sp = sobolev_products(u);
  const double lp = integrate_abs_pow(u, 2.0 * p.sigma + 2.0);
  const double mu = sp.l2_sq;
  if (mu == 0.0) throw std::invalid_argument("identity_report: zero field");
  const auto lm = lagrange_multiplier(u, p, mu);
  rep.alpha = lm.alpha;
  Params with_alpha = p;
  with_alpha.alpha = lm.alpha;
  rep.el_residual = el_residual(with_alpha, u);
  rep.pohozaev_residual = pohozaev_residual(u, p).relative;
  const double energy = 0.5 * p.gamma * sp.lap_l2_sq + 0.5 * p.beta * sp.grad_l2_sq -
                        lp / (2.0 * p.sigma + 2.0);
  rep.recovered = recover_integrals(energy, lm.alpha, mu, p);
  auto rel = [](double got, double want) {
    const double s = std::max({std::abs(got), std::abs(want), 1e-300});
    return std::abs(got - want) / s;
  };
  rep.defect_lap = rel(rep.recovered.lap_sq, sp.lap_l2_sq);
  rep.defect_grad = rel(rep.recovered.grad_sq, sp.grad_l2_sq);
  rep.defect_lp = rel(rep.recovered.lp_power, lp);
  return rep;
}

}  // namespace m4nls
