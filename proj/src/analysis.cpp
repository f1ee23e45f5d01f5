#include "m4nls/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "m4nls/functionals.hpp"

#if defined(M4NLS_HAVE_QUADMATH)
#include <quadmath.h>
namespace m4nls {
using shoot_real = __float128;
static inline shoot_real shoot_abs(shoot_real x) { return fabsq(x); }
static inline shoot_real shoot_pow(shoot_real x, shoot_real y) { return powq(x, y); }
}  // namespace m4nls
#else
namespace m4nls {
using shoot_real = long double;
static inline shoot_real shoot_abs(shoot_real x) { return fabsl(x); }
static inline shoot_real shoot_pow(shoot_real x, shoot_real y) { return powl(x, y); }
}  // namespace m4nls
#endif

namespace m4nls {

RateResult theoretical_rate(double alpha, double beta) {
  if (!(alpha > 0.0)) throw std::invalid_argument("theoretical_rate: alpha must be positive");
  const double twice_sqrt = 2.0 * std::sqrt(alpha);
  if (beta <= -twice_sqrt)
    throw std::invalid_argument("theoretical_rate: beta <= -2 sqrt(alpha), outside the wedge");
  RateResult out;
  const double seam = std::abs(beta - twice_sqrt);
  if (seam <= 1e-12 * std::max(1.0, twice_sqrt)) {
    out.regime = DecayRegime::beta_eq;
    out.rate = std::sqrt(beta);
  } else if (beta > twice_sqrt) {
    out.regime = DecayRegime::beta_gt;
    out.rate = std::sqrt(beta - std::sqrt(beta * beta - 4.0 * alpha)) / std::sqrt(2.0);
  } else {
    out.regime = DecayRegime::beta_lt;
    out.rate = std::sqrt(twice_sqrt - beta) / 2.0;
  }
  return out;
}

namespace {

struct FitAccum {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  void add(double x, double y) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++n;
  }
  // slope and r^2 of the least squares line
  std::pair<double, double> fit() const {
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double ss_tot = syy - sy * sy / n;
    const double intercept = (sy - slope * sx) / n;
    double ss_res = syy - 2.0 * slope * sxy - 2.0 * intercept * sy + slope * slope * sxx +
                    2.0 * slope * intercept * sx + intercept * intercept * n;
    double r2 = ss_tot <= 0.0 ? 1.0 : 1.0 - std::max(ss_res, 0.0) / ss_tot;
    return {slope, std::clamp(r2, 0.0, 1.0)};
  }
};

double min_image(double d, double L) {
  while (d > 0.5 * L) d -= L;
  while (d < -0.5 * L) d += L;
  return d;
}

}  // namespace

DecayFit fit_decay_rate(const Field& u, double alpha, double beta, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction < 1.0))
    throw std::invalid_argument("fit_decay_rate: window_fraction must be in (0,1)");
  const auto& grid = *u.grid;
  const double max_u = u.max_abs();
  if (max_u == 0.0) throw std::invalid_argument("fit_decay_rate: zero field");

  // decayed-edge precondition
  double edge_max = 0.0;
  int idx[3];
  const double half = 0.5 * grid.length();
  for (std::size_t i = 0; i < u.size(); ++i) {
    grid.unravel(i, idx);
    double rmax_axis = 0.0;
    for (int d = 0; d < grid.dim(); ++d)
      rmax_axis = std::max(rmax_axis, std::abs(grid.axis_coordinate(idx[d])));
    if (rmax_axis > 0.95 * half) edge_max = std::max(edge_max, std::abs(u.values[i]));
  }
  if (edge_max > 1e-8 * max_u)
    throw NumericalError("fit_decay_rate: field not decayed at the box edge");

  DecayFit fit;
  const auto tr = theoretical_rate(alpha, beta);
  fit.theoretical = tr.rate;
  fit.regime = tr.regime;

  // peak location (per axis, min-image radius from it)
  std::size_t peak = 0;
  double pv = -1.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = std::abs(u.values[i]);
    if (v > pv) {
      pv = v;
      peak = i;
    }
  }
  int pidx[3];
  grid.unravel(peak, pidx);

  const double floor_val = 1e-12 * std::max(1.0, max_u);

  if (tr.regime == DecayRegime::beta_lt) {
    // oscillatory tail: fit the local maxima of |u| along the +x axis
    if (grid.dim() != 1)
      throw std::invalid_argument("fit_decay_rate: envelope fit implemented for 1d profiles");
    const int n = grid.n();
    std::vector<std::pair<double, double>> maxima;  // (radius, log |u|)
    for (int s = 2; s < n / 2 - 1; ++s) {
      const int i = (pidx[0] + s) % n;
      const double um = std::abs(u.values[(i - 1 + n) % n]);
      const double u0 = std::abs(u.values[i]);
      const double up = std::abs(u.values[(i + 1) % n]);
      if (u0 > um && u0 >= up && u0 > floor_val)
        maxima.emplace_back(s * grid.spacing(), std::log(u0));
    }
    if (maxima.empty()) throw NumericalError("fit_decay_rate: window empty after thresholding");
    const double r_hi = maxima.back().first;
    const double r_lo = (1.0 - window_fraction) * r_hi;
    FitAccum acc;
    for (const auto& [r, lu] : maxima)
      if (r >= r_lo && r <= r_hi) acc.add(r, lu);
    if (acc.n < 3) throw NumericalError("fit_decay_rate: window empty after thresholding");
    auto [slope, r2] = acc.fit();
    fit.fitted_rate = -slope;
    fit.r_squared = r2;
    fit.r_min = r_lo;
    fit.r_max = r_hi;
    fit.samples = acc.n;
  } else {
    // plain log-linear fit over the radial window
    double r_hi = 0.0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double v = std::abs(u.values[i]);
      if (v <= floor_val) continue;
      grid.unravel(i, idx);
      double r2 = 0.0;
      for (int d = 0; d < grid.dim(); ++d) {
        const double dx = min_image(grid.axis_coordinate(idx[d]) - grid.axis_coordinate(pidx[d]),
                                    grid.length());
        r2 += dx * dx;
      }
      const double r = std::sqrt(r2);
      if (r > half) continue;  // stay inside the inscribed ball
      pts.emplace_back(r, std::log(v));
      r_hi = std::max(r_hi, r);
    }
    const double r_lo = (1.0 - window_fraction) * r_hi;
    FitAccum acc;
    for (const auto& [r, lv] : pts)
      if (r >= r_lo) acc.add(r, lv);
    if (acc.n < 3) throw NumericalError("fit_decay_rate: window empty after thresholding");
    auto [slope, r2] = acc.fit();
    fit.fitted_rate = -slope;
    fit.r_squared = r2;
    fit.r_min = r_lo;
    fit.r_max = r_hi;
    fit.samples = acc.n;
  }
  fit.non_exponential = fit.r_squared < 0.99;
  return fit;
}

DecayFit decay_fit_study(const Field& u, const Params& p, double window_fraction) {
  if (!(p.gamma > 0.0)) throw std::invalid_argument("decay_fit_study: gamma must be positive");
  auto rescaled = rescale_gamma(u, p.gamma, p.beta);
  return fit_decay_rate(rescaled.field, p.alpha, rescaled.theta, window_fraction);
}

SignReport sign_report(const Field& u, const Params& p) {
  const double max_u = u.max_abs();
  if (max_u == 0.0) throw std::invalid_argument("sign_report: zero field");
  const auto& grid = *u.grid;
  const int n = grid.n();

  std::size_t peak = 0;
  double pv = -1.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = std::abs(u.values[i]);
    if (v > pv) {
      pv = v;
      peak = i;
    }
  }
  int pidx[3];
  grid.unravel(peak, pidx);
  const double peak_sign = u.values[peak].real() < 0.0 ? -1.0 : 1.0;

  // walk along +x from the peak, other coordinates frozen
  SignReport rep;
  double global_min = u.values[peak].real() * peak_sign;
  for (std::size_t i = 0; i < u.size(); ++i)
    global_min = std::min(global_min, peak_sign * u.values[i].real());
  rep.min_over_max = global_min / max_u;

  const double threshold = 1e-10 * max_u;
  int changes = 0;
  double last_sign = peak_sign * u.values[peak].real() > 0 ? 1.0 : -1.0;
  for (int s = 1; s <= n / 2; ++s) {
    int idx3[3] = {pidx[0], pidx[1], pidx[2]};
    idx3[0] = (pidx[0] + s) % n;
    std::size_t flat = 0;
    for (int d = 0; d < grid.dim(); ++d) flat = flat * n + idx3[d];
    const double v = peak_sign * u.values[flat].real();
    if (std::abs(v) < threshold) continue;
    const double sgn = v > 0 ? 1.0 : -1.0;
    if (sgn != last_sign) {
      ++changes;
      last_sign = sgn;
    }
  }
  rep.n_sign_changes_radial = changes;
  rep.classification = changes == 0 ? "positive" : "sign_changing";
  const bool expect_positive = p.beta >= 2.0 * std::sqrt(std::max(p.gamma * p.alpha, 0.0));
  rep.matches_threshold = (changes == 0) == expect_positive;
  return rep;
}

CriticalMassResult critical_mass_search(const Params& p_in, double mu_lo, double mu_hi,
                                        const CriticalMassOptions& opt) {
  Params p = p_in;
  p.alpha = 0.0;
  validate_params(p);
  CriticalMassResult out;
  const double sN = p.sigma * p.dim;
  if (sN >= 4.0)
    throw std::invalid_argument("critical_mass_search: sigma >= 4/N, no finite threshold");
  if (sN < 2.0) {
    out.mu_c_est = 0.0;
    out.note = "sigma < 2/N: the infimum is negative for every mass, mu_c = 0";
    return out;
  }
  if (!(mu_lo > 0.0 && mu_hi > mu_lo))
    throw std::invalid_argument("critical_mass_search: need 0 < mu_lo < mu_hi");

  auto grid = make_grid(p.dim, opt.grid_n, opt.grid_length);
  GradientFlowOptions flow = opt.flow;
  flow.stop_below_energy = -1e-9;

  auto indicator = [&](double mu) {
    Params q = p;
    q.alpha = 1.0;
    Field init = gaussian_init(q, grid);
    GroundStateResult r = normalized_gradient_flow(p, mu, init, flow);
    const bool negative = r.functionals.energy < -1e-9;
    out.probes.emplace_back(mu, negative);
    return negative;
  };

  if (indicator(mu_lo))
    throw NumericalError("critical_mass_search: mu_lo already yields negative energy");
  if (!indicator(mu_hi))
    throw NumericalError("critical_mass_search: mu_hi does not yield negative energy");

  double lo = mu_lo, hi = mu_hi;
  while (hi - lo > opt.bisect_tol * 0.5 * (hi + lo)) {
    const double mid = 0.5 * (lo + hi);
    if (indicator(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.mu_c_est = 0.5 * (lo + hi);

  // the indicator must be non-decreasing across every probe evaluated
  double max_false = 0.0, min_true = std::numeric_limits<double>::max();
  for (const auto& [mu, neg] : out.probes) {
    if (neg) min_true = std::min(min_true, mu);
    else max_false = std::max(max_false, mu);
  }
  out.monotone = max_false < min_true;
  if (!out.monotone) {
    out.note = "indicator not monotone across probes, no estimate emitted";
    out.mu_c_est = 0.0;
    throw NumericalError("critical_mass_search: " + out.note);
  }
  return out;
}

std::vector<GammaLimitRow> gamma_limit_study(double beta, double mu, double sigma,
                                             const std::vector<double>& gamma_list,
                                             const GammaLimitOptions& opt) {
  if (!(beta > 0.0)) throw std::invalid_argument("gamma_limit_study: beta must be positive");
  for (std::size_t i = 0; i < gamma_list.size(); ++i) {
    if (!(gamma_list[i] > 0.0))
      throw std::invalid_argument("gamma_limit_study: gamma values must be positive");
    if (i > 0 && gamma_list[i] >= gamma_list[i - 1])
      throw std::invalid_argument("gamma_limit_study: gamma_list must be decreasing");
  }
  auto grid = make_grid(1, opt.grid_n, opt.grid_length);

  Params base;
  base.gamma = 0.0;
  base.beta = beta;
  base.sigma = sigma;
  base.dim = 1;
  if (!(sigma * base.dim < 2.0))
    throw std::invalid_argument("gamma_limit_study: requires sigma < 2/N");

  // second-order limit profile
  Params seed = base;
  seed.alpha = 1.0;
  Field init = gaussian_init(seed, grid);
  GroundStateResult limit = normalized_gradient_flow(base, mu, init, opt.flow);
  const Field& w_mu = limit.profile;
  const double w_peak = peak_position_1d(w_mu);

  std::vector<GammaLimitRow> rows(gamma_list.size());
  auto run_one = [&](std::size_t i) {
    Params p = base;
    p.gamma = gamma_list[i];
    GroundStateResult r = normalized_gradient_flow(p, mu, w_mu, opt.flow);
    GammaLimitRow row;
    row.gamma = gamma_list[i];
    row.alpha = r.alpha;
    row.gamma_lap = p.gamma * sobolev_products(r.profile).lap_l2_sq;
    // align by peak and sign, then take the three norms of the difference
    Field aligned = r.profile;
    const double shift[3] = {peak_position_1d(aligned) - w_peak, 0.0, 0.0};
    aligned = translate(aligned, shift);
    const double sgn =
        aligned.values[std::size_t(std::max(0l, long(aligned.size()) / 2))].real() *
                    w_mu.values[w_mu.size() / 2].real() <
                0.0
            ? -1.0
            : 1.0;
    Field diff = aligned;
    for (std::size_t j = 0; j < diff.size(); ++j)
      diff.values[j] = sgn * aligned.values[j] - w_mu.values[j];
    const auto sp = sobolev_products(diff);
    row.err_l2 = std::sqrt(sp.l2_sq);
    row.err_h1 = std::sqrt(sp.l2_sq + sp.grad_l2_sq);
    row.err_h2 = std::sqrt(sp.h2_sq);
    rows[i] = row;
  };

  const int threads = std::max(1, opt.threads);
  if (threads == 1 || gamma_list.size() < 2) {
    for (std::size_t i = 0; i < gamma_list.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < rows.size(); i = next.fetch_add(1)) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  return rows;
}

// ---- shooting ---------------------------------------------------------------

namespace {

struct ShootSystem {
  shoot_real lambda1, lambda2, alpha, beta, two_sigma;

  // y = (u, u', w, w') with w = u'' - lambda1 u
  void deriv(const shoot_real y[4], shoot_real dy[4]) const {
    dy[0] = y[1];
    dy[1] = y[2] + lambda1 * y[0];
    dy[2] = y[3];
    dy[3] = lambda2 * y[2] + nonlinearity(y[0]);
  }

  shoot_real nonlinearity(shoot_real u) const {
    if (u == 0) return 0;
    const shoot_real a = shoot_abs(u);
    return (u > 0 ? shoot_real(1) : shoot_real(-1)) * shoot_pow(a, two_sigma + 1);
  }

  shoot_real hamiltonian(const shoot_real y[4]) const {
    const shoot_real u = y[0], up = y[1];
    const shoot_real upp = y[2] + lambda1 * u;
    const shoot_real uppp = y[3] + lambda1 * up;
    const shoot_real pw = shoot_pow(shoot_abs(u), two_sigma + 2);
    return up * (uppp + beta / 2 * up) + alpha / 2 * u * u - pw / (two_sigma + 2) -
           upp * upp / 2;
  }
};

}  // namespace

ShootResult shoot_1d(const Params& p, double u0, double upp0, double x_max, double step,
                     const ShootOptions& opt) {
  if (!(p.alpha > 0.0)) throw std::invalid_argument("shoot_1d: alpha must be positive");
  const double disc = p.beta * p.beta - 4.0 * p.alpha;
  if (disc < -1e-12 * std::max(1.0, p.beta * p.beta))
    throw std::invalid_argument(
        "shoot_1d: beta < 2 sqrt(alpha), the real factorization does not exist");
  if (!(step > 0.0) || !(x_max > 0.0))
    throw std::invalid_argument("shoot_1d: step and x_max must be positive");

  ShootSystem sys;
  const shoot_real root = std::sqrt(std::max(disc, 0.0));
  sys.lambda1 = (shoot_real(p.beta) - root) / 2;
  sys.lambda2 = (shoot_real(p.beta) + root) / 2;
  sys.alpha = p.alpha;
  sys.beta = p.beta;
  sys.two_sigma = 2.0 * p.sigma;

  shoot_real y[4] = {shoot_real(u0), 0, shoot_real(upp0) - sys.lambda1 * shoot_real(u0), 0};
  const shoot_real h = step;
  const long steps = std::lround(x_max / step);

  ShootResult res;
  const shoot_real h0 = sys.hamiltonian(y);
  shoot_real drift = 0;
  double second_half_min = std::abs(u0);

  auto push_state = [&](long s) {
    ShootState st;
    st.x = double(s) * step;
    st.u = double(y[0]);
    st.up = double(y[1]);
    st.upp = double(y[2] + sys.lambda1 * y[0]);
    st.uppp = double(y[3] + sys.lambda1 * y[1]);
    st.hamiltonian = double(sys.hamiltonian(y));
    res.trajectory.push_back(st);
  };
  push_state(0);

  shoot_real k1[4], k2[4], k3[4], k4[4], tmp[4];
  long s = 0;
  for (s = 1; s <= steps; ++s) {
    sys.deriv(y, k1);
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + h / 2 * k1[i];
    sys.deriv(tmp, k2);
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + h / 2 * k2[i];
    sys.deriv(tmp, k3);
    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + h * k3[i];
    sys.deriv(tmp, k4);
    for (int i = 0; i < 4; ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);

    const shoot_real dh = sys.hamiltonian(y) - h0;
    const shoot_real adh = dh < 0 ? -dh : dh;
    if (adh > drift) drift = adh;

    const double au = std::abs(double(y[0]));
    if (double(s) * step > 0.5 * x_max) second_half_min = std::min(second_half_min, au);
    if (s % opt.record_every == 0 || s == steps) push_state(s);
    if (au > opt.divergence_threshold) {
      res.outcome = ShootOutcome::diverged;
      res.stopped_at = double(s) * step;
      res.h_drift = double(drift);
      return res;
    }
  }
  res.stopped_at = x_max;
  res.h_drift = double(drift);
  res.outcome = second_half_min < opt.decay_threshold ? ShootOutcome::decayed
                                                      : ShootOutcome::undecided;
  return res;
}

double default_box_length(const Params& p) {
  double rate;
  if (p.gamma > 0.0) {
    const auto tr = theoretical_rate(p.alpha, p.beta / std::sqrt(p.gamma));
    rate = tr.rate * std::pow(p.gamma, -0.25);
  } else {
    rate = std::sqrt(p.alpha);
  }
  return std::max(2.0 * 30.0 / rate, 20.0);
}

}  // namespace m4nls
