#include "m4nls/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace m4nls {

namespace {

bool integer_power(double two_sigma) {
  return std::abs(two_sigma - std::round(two_sigma)) < 1e-12;
}

void finalize(GroundStateResult& r, const Params& p) {
  r.mass = integrate_abs2(r.profile);
  r.el_residual = el_residual(p, r.profile);
  r.functionals = evaluate(r.profile, p, p.alpha);
}

}  // namespace

GroundStateResult petviashvili_solve(const Params& p, const Field& init,
                                     const PetviashviliOptions& opt) {
  validate_params(p);
  if (!(p.alpha > 0.0)) throw std::invalid_argument("petviashvili: alpha must be positive");
  if (auto bad = symbol_violation(p, *init.grid)) {
    std::ostringstream os;
    os << "petviashvili: symbol not positive (value " << bad->second << " at |k|^2 = "
       << bad->first << ")";
    throw NumericalError(os.str());
  }
  check_finite(init, "petviashvili");
  if (init.max_abs() == 0.0) throw std::invalid_argument("petviashvili: zero initial guess");

  const double theta = (2.0 * p.sigma + 1.0) / (2.0 * p.sigma);
  const bool dealias = integer_power(2.0 * p.sigma);

  GroundStateResult res;
  res.params = p;
  res.alpha = p.alpha;
  Field u = init;
  u.force_real();

  for (int it = 1; it <= opt.max_iter; ++it) {
    Field g = nonlinear_term(u, p.sigma);
    if (dealias) g = dealias_two_thirds(g);
    const auto sp = sobolev_products(u);
    const double quad = p.gamma * sp.lap_l2_sq + p.beta * sp.grad_l2_sq + p.alpha * sp.l2_sq;
    const double pairing = inner_l2(g, u);
    if (!(pairing > 0.0) || !std::isfinite(quad))
      throw NumericalError("petviashvili: degenerate nonlinear pairing");
    const double S = quad / pairing;
    if (it > 5 && (S < opt.guard_lo || S > opt.guard_hi)) {
      std::ostringstream os;
      os << "petviashvili: stabilizing factor drifted to " << S << " at iteration " << it;
      throw NumericalError(os.str());
    }
    Field next = invert_linear(p, g);
    const double amp = std::pow(S, theta);
    for (auto& v : next.values) v *= amp;
    next.force_real();

    u = std::move(next);
    res.iterations = it;
    res.stabilizing_factor = S;
    if (el_residual(p, u) < opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.profile = u;
  finalize(res, p);
  res.converged = res.el_residual < opt.tol;
  if (!res.converged) {
    std::ostringstream os;
    os << "petviashvili: max_iter (" << opt.max_iter << ") reached with residual "
       << res.el_residual;
    throw NumericalError(os.str());
  }
  return res;
}

GroundStateResult normalized_gradient_flow(const Params& p_in, double mu, const Field& init,
                                           const GradientFlowOptions& opt) {
  Params p = p_in;
  p.alpha = 0.0;
  validate_params(p);
  if (!(mu > 0.0)) throw std::invalid_argument("gradient flow: mu must be positive");
  if (p.sigma * p.dim >= 4.0)
    throw std::invalid_argument("gradient flow: sigma >= 4/N, the infimum is -infinity");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("gradient flow: dt must be positive");
  check_finite(init, "gradient flow");
  if (init.max_abs() == 0.0) throw std::invalid_argument("gradient flow: zero initial guess");

  const bool dealias = integer_power(2.0 * p.sigma);

  auto renormalize = [&](Field& f) {
    const double m = integrate_abs2(f);
    const double s = std::sqrt(mu / m);
    for (auto& v : f.values) v *= s;
  };

  Field u = init;
  u.force_real();
  renormalize(u);

  auto energy_of = [&](const Field& f) { return evaluate(f, p).energy; };

  GroundStateResult res;
  res.params = p;
  double dt = opt.dt;
  double energy = energy_of(u);
  int flat_steps = 0;
  int stationary = 0;
  bool polishing = false;
  int polish_steps = 0;

  auto residual_now = [&]() {
    const auto lm = lagrange_multiplier(u, p, mu);
    Params pa = p;
    pa.alpha = lm.alpha;
    return el_residual(pa, u);
  };

  for (int it = 1; it <= opt.max_iter; ++it) {
    Field g = nonlinear_term(u, p.sigma);
    if (dealias) g = dealias_two_thirds(g);
    Field rhs = u;
    for (std::size_t i = 0; i < rhs.values.size(); ++i) rhs.values[i] += dt * g.values[i];
    Field next = invert_semi_implicit(p, dt, rhs);
    next.force_real();
    renormalize(next);
    const double next_energy = energy_of(next);

    if (next_energy > energy) {
      dt *= 0.5;
      if (dt < opt.dt_floor) {
        res.profile = u;
        res.iterations = it;
        res.note = "gradient flow: energy oscillation at the dt floor";
        const auto lm = lagrange_multiplier(u, p, mu);
        res.alpha = lm.alpha;
        Params pa = p;
        pa.alpha = res.alpha;
        res.params = pa;
        finalize(res, pa);
        throw NumericalError(res.note);
      }
      continue;  // reject the step, retry from u
    }

    u = std::move(next);
    res.iterations = it;
    const double prev_energy = energy;
    energy = next_energy;

    if (energy < opt.stop_below_energy) {
      res.profile = u;
      res.note = "negative-energy level reached";
      const auto lm = lagrange_multiplier(u, p, mu);
      res.alpha = lm.alpha;
      Params pa = p;
      pa.alpha = res.alpha;
      res.params = pa;
      finalize(res, pa);
      res.converged = false;
      return res;
    }

    if (energy > -1e-10) {
      if (++flat_steps >= opt.flat_steps_limit) {
        res.profile = u;
        res.note = "no negative-energy minimizer detected";
        const auto lm = lagrange_multiplier(u, p, mu);
        res.alpha = lm.alpha;
        Params pa = p;
        pa.alpha = res.alpha;
        res.params = pa;
        finalize(res, pa);
        res.converged = false;
        return res;
      }
    } else {
      flat_steps = 0;
    }

    if (std::abs(energy - prev_energy) < opt.tol * std::abs(energy)) {
      if (++stationary >= 3) polishing = true;
    } else {
      stationary = 0;
    }
    // stationary energy is quadratic around the minimizer, so keep flowing
    // until the Euler-Lagrange residual itself is small
    if (polishing) {
      ++polish_steps;
      if (polish_steps % 10 == 0 && residual_now() < opt.el_tol) break;
      if (polish_steps > 4000) break;
    }
  }

  res.profile = u;
  const auto lm = lagrange_multiplier(u, p, mu);
  res.alpha = lm.alpha;
  Params pa = p;
  pa.alpha = res.alpha;
  res.params = pa;
  finalize(res, pa);
  res.converged = res.el_residual < opt.el_tol;
  if (!res.converged) res.note = "gradient flow: residual above tolerance";
  return res;
}

Field fourier_rearrange(const Field& u) {
  const auto& grid = *u.grid;
  auto coeffs = spectral_coefficients(u);
  const std::size_t n = coeffs.size();

  // Modes sorted by |k|^2 (ties by flat index), moduli sorted decreasingly.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> k2(n);
  for (std::size_t i = 0; i < n; ++i) k2[i] = grid.k_squared(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return k2[a] < k2[b]; });
  std::vector<double> moduli(n);
  for (std::size_t i = 0; i < n; ++i) moduli[i] = std::abs(coeffs[i]);
  std::sort(moduli.begin(), moduli.end(), std::greater<double>());

  // The (-1)^m phase anchors the peak at the box center instead of the DFT
  // origin; it is a pure half-box translation, so every norm is untouched.
  std::vector<cplx> rearranged(n);
  int idx[3];
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t target = order[i];
    grid.unravel(target, idx);
    int parity = 0;
    for (int d = 0; d < grid.dim(); ++d) parity += idx[d];
    rearranged[target] = cplx(parity % 2 == 0 ? moduli[i] : -moduli[i], 0.0);
  }
  Field out = field_from_coefficients(u.grid, std::move(rearranged), u.kind);
  if (u.is_real()) out.force_real();
  return out;
}

RescaleResult rescale_gamma(const Field& u, double gamma, double beta) {
  if (!(gamma > 0.0)) throw std::invalid_argument("rescale_gamma: gamma must be positive");
  const double scale = std::pow(gamma, -0.25);
  RescaleResult res;
  res.theta = beta / std::sqrt(gamma);
  auto grid = make_grid(u.grid->dim(), u.grid->n(), u.grid->length() * scale);
  res.field = u;
  res.field.grid = grid;
  return res;
}

Field nls_soliton(double alpha, double sigma, const GridPtr& grid) {
  if (grid->dim() != 1)
    throw std::invalid_argument("nls_soliton: closed form available in 1d only");
  if (!(alpha > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("nls_soliton: alpha and sigma must be positive");
  const double amp = std::pow((sigma + 1.0) * alpha, 1.0 / (2.0 * sigma));
  const double rate = sigma * std::sqrt(alpha);
  return Field::from_function(grid, [=](double x, double, double) {
    return amp * std::pow(1.0 / std::cosh(rate * x), 1.0 / sigma);
  });
}

Field gaussian_init(const Params& p, const GridPtr& grid) {
  const double a = p.alpha > 0.0 ? p.alpha : 1.0;
  const double amp = std::pow((p.sigma + 1.0) * a, 1.0 / (2.0 * p.sigma));
  const double w = p.sigma * std::sqrt(a);
  return Field::from_function(grid, [=](double x, double y, double z) {
    const double r2 = x * x + y * y + z * z;
    return amp * std::exp(-0.5 * w * w * r2);
  });
}

double peak_position_1d(const Field& u) {
  if (u.grid->dim() != 1) throw std::invalid_argument("peak_position_1d: 1d only");
  const int n = u.grid->n();
  int best = 0;
  double best_val = -1.0;
  // strictly-greater keeps the smallest coordinate on ties
  for (int i = 0; i < n; ++i) {
    const double v = std::abs(u.values[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  const double h = u.grid->spacing();
  const double ym = std::abs(u.values[(best - 1 + n) % n]);
  const double y0 = best_val;
  const double yp = std::abs(u.values[(best + 1) % n]);
  const double denom = ym - 2.0 * y0 + yp;
  double delta = 0.0;
  if (std::abs(denom) > 1e-300) delta = 0.5 * (ym - yp) / denom;
  delta = std::clamp(delta, -0.5, 0.5);
  return u.grid->axis_coordinate(best) + delta * h;
}

Field translate(const Field& u, const double r[3]) {
  const auto& grid = *u.grid;
  auto coeffs = spectral_coefficients(u);
  const int nyq = grid.n() / 2;
  int idx[3];
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    grid.unravel(i, idx);
    double phase = 0.0;
    bool nyquist = false;
    for (int d = 0; d < grid.dim(); ++d) {
      if (idx[d] == nyq && r[d] != 0.0) nyquist = true;
      phase += grid.axis_wavenumber(idx[d]) * r[d];
    }
    // the translated Nyquist mode has no conjugate partner; keep the real
    // cosine part so real fields stay real
    if (nyquist) {
      coeffs[i] *= std::cos(phase);
    } else {
      coeffs[i] *= std::exp(cplx(0.0, -phase));
    }
  }
  return field_from_coefficients(u.grid, std::move(coeffs), u.kind);
}

double aligned_linf_diff(const Field& a, const Field& b) {
  if (!a.grid->compatible_with(*b.grid))
    throw std::invalid_argument("aligned_linf_diff: grid mismatch");
  const double pa = peak_position_1d(a);
  const double pb = peak_position_1d(b);
  double shift[3] = {pa - pb, 0.0, 0.0};
  Field bs = translate(b, shift);
  // sign normalization: make both peaks positive
  auto sign_at_peak = [](const Field& f, double pos) {
    const double h = f.grid->spacing();
    int i = int(std::lround((pos + 0.5 * f.grid->length()) / h)) % f.grid->n();
    if (i < 0) i += f.grid->n();
    return f.values[i].real() < 0.0 ? -1.0 : 1.0;
  };
  const double sa = sign_at_peak(a, pa);
  const double sb = sign_at_peak(bs, pa);
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff = std::max(diff, std::abs(sa * a.values[i].real() - sb * bs.values[i].real()));
    scale = std::max(scale, std::abs(a.values[i].real()));
  }
  return scale == 0.0 ? diff : diff / scale;
}

}  // namespace m4nls
