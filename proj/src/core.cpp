#include "m4nls/core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace m4nls {

void validate_params(const Params& p) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(p.gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
  if (p.dim < 1 || p.dim > 3) throw std::invalid_argument("dim must be 1, 2 or 3");
  if (!std::isfinite(p.beta) || !std::isfinite(p.alpha))
    throw std::invalid_argument("beta/alpha must be finite");
}

SpectralGrid::SpectralGrid(int dim, int n_per_dim, double box_length)
    : dim_(dim), n_(n_per_dim), length_(box_length) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("grid dim must be 1, 2 or 3");
  if (n_per_dim % 2 != 0) throw std::invalid_argument("n must be even");
  if (n_per_dim < 16) throw std::invalid_argument("n must be >= 16");
  if (!(box_length > 0.0)) throw std::invalid_argument("box length must be positive");
  size_ = 1;
  for (int d = 0; d < dim_; ++d) size_ *= std::size_t(n_);
  k1d_.resize(n_);
  const double base = 2.0 * M_PI / length_;
  for (int j = 0; j < n_; ++j) {
    const int m = (j < n_ / 2) ? j : j - n_;
    k1d_[j] = base * m;
  }
}

void SpectralGrid::unravel(std::size_t flat, int idx[3]) const {
  idx[0] = idx[1] = idx[2] = 0;
  for (int d = dim_ - 1; d >= 0; --d) {
    idx[d] = int(flat % std::size_t(n_));
    flat /= std::size_t(n_);
  }
}

double SpectralGrid::k_squared(std::size_t flat) const {
  int idx[3];
  unravel(flat, idx);
  double k2 = 0.0;
  for (int d = 0; d < dim_; ++d) {
    const double k = k1d_[idx[d]];
    k2 += k * k;
  }
  return k2;
}

GridPtr make_grid(int dim, int n_per_dim, double box_length) {
  return std::make_shared<SpectralGrid>(dim, n_per_dim, box_length);
}

Field::Field(GridPtr g, FieldKind k) : grid(std::move(g)), kind(k) {
  values.assign(grid->size(), cplx(0.0, 0.0));
}

double Field::max_abs() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v));
  return m;
}

double Field::relative_imag() const {
  double mi = 0.0;
  for (const auto& v : values) mi = std::max(mi, std::abs(v.imag()));
  const double ma = max_abs();
  return ma == 0.0 ? 0.0 : mi / ma;
}

void Field::force_real() {
  for (auto& v : values) v = cplx(v.real(), 0.0);
  kind = FieldKind::real;
}

Field Field::zeros(GridPtr g, FieldKind k) { return Field(std::move(g), k); }

Field Field::from_function(GridPtr g, const std::function<double(double, double, double)>& f) {
  Field out(g, FieldKind::real);
  int idx[3];
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    g->unravel(i, idx);
    const double x = g->axis_coordinate(idx[0]);
    const double y = g->dim() > 1 ? g->axis_coordinate(idx[1]) : 0.0;
    const double z = g->dim() > 2 ? g->axis_coordinate(idx[2]) : 0.0;
    out.values[i] = cplx(f(x, y, z), 0.0);
  }
  return out;
}

Field Field::from_complex_function(GridPtr g,
                                   const std::function<cplx(double, double, double)>& f) {
  Field out(g, FieldKind::complex);
  int idx[3];
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    g->unravel(i, idx);
    const double x = g->axis_coordinate(idx[0]);
    const double y = g->dim() > 1 ? g->axis_coordinate(idx[1]) : 0.0;
    const double z = g->dim() > 2 ? g->axis_coordinate(idx[2]) : 0.0;
    out.values[i] = f(x, y, z);
  }
  return out;
}

void check_finite(const Field& f, const char* where) {
  for (const auto& v : f.values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericalError(std::string(where) + ": NaN or Inf in input field");
}

// ---- FFT plan cache --------------------------------------------------------

namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

// Plans are created once per (dim, n) with FFTW_ESTIMATE (deterministic) and
// executed on caller buffers through the new-array interface. Creation is
// serialized; execution on distinct arrays is thread-safe.
PlanPair& plans_for(const SpectralGrid& grid) {
  static std::map<std::pair<int, int>, PlanPair> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(grid.dim(), grid.n());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::vector<cplx> buf(grid.size());
  auto* ptr = reinterpret_cast<fftw_complex*>(buf.data());
  int dims[3] = {grid.n(), grid.n(), grid.n()};
  PlanPair pp;
  pp.fwd = fftw_plan_dft(grid.dim(), dims, ptr, ptr, FFTW_FORWARD,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
  pp.bwd = fftw_plan_dft(grid.dim(), dims, ptr, ptr, FFTW_BACKWARD,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!pp.fwd || !pp.bwd) throw std::runtime_error("fftw plan creation failed");
  return cache.emplace(key, pp).first->second;
}

}  // namespace

void fft_forward(const SpectralGrid& grid, std::vector<cplx>& data) {
  auto& pp = plans_for(grid);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(pp.fwd, ptr, ptr);
}

void fft_inverse(const SpectralGrid& grid, std::vector<cplx>& data) {
  auto& pp = plans_for(grid);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(pp.bwd, ptr, ptr);
  const double scale = 1.0 / double(grid.size());
  for (auto& v : data) v *= scale;
}

std::vector<cplx> spectral_coefficients(const Field& f) {
  std::vector<cplx> coeffs = f.values;
  fft_forward(*f.grid, coeffs);
  return coeffs;
}

Field field_from_coefficients(GridPtr grid, std::vector<cplx> coeffs, FieldKind kind) {
  fft_inverse(*grid, coeffs);
  Field out;
  out.grid = std::move(grid);
  out.values = std::move(coeffs);
  out.kind = kind;
  return out;
}

// ---- operators -------------------------------------------------------------

Field apply_symbol(const Field& f, const std::function<double(double)>& g) {
  auto coeffs = spectral_coefficients(f);
  const auto& grid = *f.grid;
  for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] *= g(grid.k_squared(i));
  return field_from_coefficients(f.grid, std::move(coeffs), f.kind);
}

Field apply_diff(const Field& f, DiffOp op) {
  check_finite(f, "apply_diff");
  if (op == DiffOp::laplacian) return apply_symbol(f, [](double k2) { return -k2; });
  return apply_symbol(f, [](double k2) { return k2 * k2; });
}

Field derivative_axis(const Field& f, int axis) {
  const auto& grid = *f.grid;
  if (axis < 0 || axis >= grid.dim()) throw std::invalid_argument("derivative axis out of range");
  auto coeffs = spectral_coefficients(f);
  const int nyq = grid.n() / 2;
  int idx[3];
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    grid.unravel(i, idx);
    if (idx[axis] == nyq) {
      coeffs[i] = 0.0;  // odd symbol: drop the unpaired Nyquist mode
    } else {
      coeffs[i] *= cplx(0.0, grid.axis_wavenumber(idx[axis]));
    }
  }
  return field_from_coefficients(f.grid, std::move(coeffs), f.kind);
}

Field apply_linear_operator(const Params& p, const Field& f) {
  const double g = p.gamma, b = p.beta, a = p.alpha;
  return apply_symbol(f, [=](double k2) { return g * k2 * k2 + b * k2 + a; });
}

std::optional<std::pair<double, double>> symbol_violation(const Params& p,
                                                          const SpectralGrid& grid) {
  // The symbol depends on |k|^2 only; scanning the radial values reachable on
  // the grid per axis is enough to find the minimum over the full grid.
  double worst_val = 0.0, worst_k2 = 0.0;
  bool found = false;
  // collect distinct axis k^2 values and combine up to dim of them
  std::vector<double> k2axis(grid.n());
  for (int j = 0; j < grid.n(); ++j) {
    const double k = grid.axis_wavenumber(j);
    k2axis[j] = k * k;
  }
  std::sort(k2axis.begin(), k2axis.end());
  k2axis.erase(std::unique(k2axis.begin(), k2axis.end()), k2axis.end());
  auto test = [&](double k2) {
    const double val = p.gamma * k2 * k2 + p.beta * k2 + p.alpha;
    if (val <= 0.0 && (!found || val < worst_val)) {
      found = true;
      worst_val = val;
      worst_k2 = k2;
    }
  };
  if (grid.dim() == 1) {
    for (double a : k2axis) test(a);
  } else if (grid.dim() == 2) {
    for (double a : k2axis)
      for (double b : k2axis) test(a + b);
  } else {
    for (double a : k2axis)
      for (double b : k2axis)
        for (double c : k2axis) test(a + b + c);
  }
  if (found) return std::make_pair(worst_k2, worst_val);
  return std::nullopt;
}

Field invert_linear(const Params& p, const Field& rhs) {
  if (auto bad = symbol_violation(p, *rhs.grid)) {
    std::ostringstream os;
    os << "invert_linear: symbol gamma*k^4 + beta*k^2 + alpha is not positive on the grid"
       << " (value " << bad->second << " at |k|^2 = " << bad->first << ")";
    throw NumericalError(os.str());
  }
  const double g = p.gamma, b = p.beta, a = p.alpha;
  return apply_symbol(rhs, [=](double k2) { return 1.0 / (g * k2 * k2 + b * k2 + a); });
}

Field invert_semi_implicit(const Params& p, double dt, const Field& f) {
  const double g = p.gamma, b = p.beta;
  Params check{p.gamma * dt, p.beta * dt, 1.0, p.sigma, p.dim};
  if (auto bad = symbol_violation(check, *f.grid)) {
    std::ostringstream os;
    os << "semi-implicit operator not positive on the grid (value " << bad->second
       << " at |k|^2 = " << bad->first << ")";
    throw NumericalError(os.str());
  }
  return apply_symbol(f, [=](double k2) { return 1.0 / (1.0 + dt * (g * k2 * k2 + b * k2)); });
}

// ---- quadrature ------------------------------------------------------------

double integrate(const Field& f) {
  if (!f.is_real())
    throw std::invalid_argument("integrate: complex field (use the |f|^2 based forms)");
  check_finite(f, "integrate");
  double s = 0.0;
  for (const auto& v : f.values) s += v.real();
  return f.grid->cell_volume() * s;
}

double integrate_abs2(const Field& f) {
  double s = 0.0;
  for (const auto& v : f.values) s += std::norm(v);
  return f.grid->cell_volume() * s;
}

double integrate_abs_pow(const Field& f, double p) {
  double s = 0.0;
  for (const auto& v : f.values) s += std::pow(std::abs(v), p);
  return f.grid->cell_volume() * s;
}

double inner_l2(const Field& a, const Field& b) {
  if (!a.grid->compatible_with(*b.grid)) throw std::invalid_argument("inner_l2: grid mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    s += (std::conj(a.values[i]) * b.values[i]).real();
  return a.grid->cell_volume() * s;
}

SobolevProducts sobolev_products(const Field& f) {
  auto coeffs = spectral_coefficients(f);
  const auto& grid = *f.grid;
  const double w = grid.spectral_weight();
  SobolevProducts out;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double k2 = grid.k_squared(i);
    const double a2 = std::norm(coeffs[i]);
    out.l2_sq += a2;
    out.grad_l2_sq += k2 * a2;
    out.lap_l2_sq += k2 * k2 * a2;
  }
  out.l2_sq *= w;
  out.grad_l2_sq *= w;
  out.lap_l2_sq *= w;
  out.h2_sq = out.l2_sq + out.grad_l2_sq + out.lap_l2_sq;
  return out;
}

double h2_distance(const Field& a, const Field& b) {
  if (!a.grid->compatible_with(*b.grid)) throw std::invalid_argument("h2_distance: grid mismatch");
  auto ca = spectral_coefficients(a);
  auto cb = spectral_coefficients(b);
  const auto& grid = *a.grid;
  const double w = grid.spectral_weight();
  double s = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const double k2 = grid.k_squared(i);
    s += (1.0 + k2 + k2 * k2) * std::norm(ca[i] - cb[i]);
  }
  return std::sqrt(w * s);
}

double el_residual(const Params& p, const Field& u) {
  Field lin = apply_linear_operator(p, u);
  Field nl = nonlinear_term(u, p.sigma);
  double s = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) s += std::norm(lin.values[i] - nl.values[i]);
  const double res = std::sqrt(u.grid->cell_volume() * s);
  const double h2 = std::sqrt(sobolev_products(u).h2_sq);
  return h2 == 0.0 ? res : res / h2;
}

Field nonlinear_term(const Field& u, double sigma) {
  Field out = u;
  for (auto& v : out.values) {
    const double m2 = std::norm(v);
    if (m2 < 1e-300) {
      v = 0.0;
    } else {
      v *= std::exp(sigma * std::log(m2));
    }
  }
  return out;
}

Field dealias_two_thirds(const Field& f) {
  const auto& grid = *f.grid;
  auto coeffs = spectral_coefficients(f);
  const int cutoff = grid.n() / 3;  // keep |m| <= n/3 per axis
  int idx[3];
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    grid.unravel(i, idx);
    for (int d = 0; d < grid.dim(); ++d) {
      const int m = idx[d] < grid.n() / 2 ? idx[d] : idx[d] - grid.n();
      if (std::abs(m) > cutoff) {
        coeffs[i] = 0.0;
        break;
      }
    }
  }
  return field_from_coefficients(f.grid, std::move(coeffs), f.kind);
}

}  // namespace m4nls
