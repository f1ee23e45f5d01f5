#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace m4nls {

using cplx = std::complex<double>;

/// Error thrown when a numerical contract is violated at run time
/// (non-positive symbol, solver divergence, non-monotone indicator, ...).
/// The CLI maps it to exit code 2, as opposed to usage errors (exit 1).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Coefficients of the stationary operator gamma*Lap^2 - beta*Lap + alpha,
/// the nonlinearity power sigma (nonlinear term |u|^(2 sigma) u), and the
/// space dimension.
struct Params {
  double gamma = 1.0;
  double beta = 0.0;
  double alpha = 0.0;
  double sigma = 1.0;
  int dim = 1;
};

/// Throws std::invalid_argument unless sigma > 0, gamma >= 0 and dim in 1..3.
void validate_params(const Params& p);

/// Uniform periodic box [-L/2, L/2)^dim sampled with n points per axis.
/// Wavenumbers follow the usual DFT layout: for 1d index j in [0, n),
/// the integer frequency is m = j for j < n/2 and m = j - n otherwise,
/// and k = 2*pi*m / L.
class SpectralGrid {
 public:
  SpectralGrid(int dim, int n_per_dim, double box_length);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double length() const { return length_; }
  double spacing() const { return length_ / n_; }
  std::size_t size() const { return size_; }

  /// Scale factor turning a plain sum over spectral coefficients of |F|^2
  /// into the integral of |f|^2 (Parseval with the unnormalized forward DFT).
  double spectral_weight() const { return std::pow(spacing(), dim_) / double(size_); }

  /// Quadrature weight h^dim of the scaled-sum rule.
  double cell_volume() const { return std::pow(spacing(), dim_); }

  double axis_wavenumber(int j) const { return k1d_[j]; }
  const std::vector<double>& axis_wavenumbers() const { return k1d_; }

  /// Physical coordinate of 1d index j along any axis.
  double axis_coordinate(int j) const { return -0.5 * length_ + spacing() * j; }

  void unravel(std::size_t flat, int idx[3]) const;

  /// |k|^2 at a flat row-major index.
  double k_squared(std::size_t flat) const;

  bool compatible_with(const SpectralGrid& other) const {
    return dim_ == other.dim_ && n_ == other.n_ && length_ == other.length_;
  }

 private:
  int dim_;
  int n_;
  double length_;
  std::size_t size_;
  std::vector<double> k1d_;
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

/// Builds a grid; errors on odd or too-small n and non-positive L.
GridPtr make_grid(int dim, int n_per_dim, double box_length);

enum class FieldKind { real, complex };

/// Sampled function on a SpectralGrid, row-major over axes. Storage is
/// complex; `kind` records whether the field is semantically real, in which
/// case the imaginary parts stay at round-off level.
struct Field {
  GridPtr grid;
  std::vector<cplx> values;
  FieldKind kind = FieldKind::real;

  Field() = default;
  Field(GridPtr g, FieldKind k);

  std::size_t size() const { return values.size(); }
  bool is_real() const { return kind == FieldKind::real; }

  double max_abs() const;
  /// Largest |imag| over samples, relative to max_abs (0 for the zero field).
  double relative_imag() const;
  /// Drops imaginary parts and tags the field real.
  void force_real();

  static Field zeros(GridPtr g, FieldKind k = FieldKind::real);
  /// Samples a scalar function of the coordinates (up to dim of them used).
  static Field from_function(GridPtr g, const std::function<double(double, double, double)>& f);
  static Field from_complex_function(GridPtr g,
                                     const std::function<cplx(double, double, double)>& f);
};

void check_finite(const Field& f, const char* where);

// ---- transforms -----------------------------------------------------------

/// Unnormalized forward DFT of the samples (in place).
void fft_forward(const SpectralGrid& grid, std::vector<cplx>& data);
/// Inverse DFT including the 1/n^dim normalization (in place).
void fft_inverse(const SpectralGrid& grid, std::vector<cplx>& data);

/// Forward transform into a fresh coefficient vector.
std::vector<cplx> spectral_coefficients(const Field& f);
/// Builds a field from spectral coefficients (takes ownership).
Field field_from_coefficients(GridPtr grid, std::vector<cplx> coeffs, FieldKind kind);

// ---- differential / multiplier operators ----------------------------------

enum class DiffOp { laplacian, bilaplacian };

/// Applies the Laplacian (symbol -|k|^2) or bilaplacian (symbol |k|^4).
Field apply_diff(const Field& f, DiffOp op);

/// Multiplies spectral coefficients by g(|k|^2); even symbols only.
Field apply_symbol(const Field& f, const std::function<double(double)>& g);

/// Spectral partial derivative along `axis`; the Nyquist mode is zeroed
/// as required for odd-order symbols on real data.
Field derivative_axis(const Field& f, int axis);

/// gamma*Lap^2 f - beta*Lap f + alpha f.
Field apply_linear_operator(const Params& p, const Field& f);

/// Scans the grid for non-positive values of gamma*|k|^4 + beta*|k|^2 + alpha.
/// Returns the offending (|k|^2, symbol value) with the smallest symbol, or
/// nullopt when the symbol is positive everywhere on the grid.
std::optional<std::pair<double, double>> symbol_violation(const Params& p,
                                                          const SpectralGrid& grid);

/// Solves (gamma*Lap^2 - beta*Lap + alpha) u = rhs by symbol division.
/// Throws NumericalError when the symbol is not positive on the grid.
Field invert_linear(const Params& p, const Field& rhs);

/// Semi-implicit resolvent (Id + dt*(gamma*Lap^2 - beta*Lap))^{-1} f.
Field invert_semi_implicit(const Params& p, double dt, const Field& f);

// ---- quadrature and norms --------------------------------------------------

/// Trapezoid rule on the periodic box, h^dim * sum. Real fields only.
double integrate(const Field& f);

/// integral of |f|^2 (works for real and complex fields).
double integrate_abs2(const Field& f);

/// integral of |f|^p for p > 0.
double integrate_abs_pow(const Field& f, double p);

/// L2 pairing h^dim * sum(conj(a) * b), real part.
double inner_l2(const Field& a, const Field& b);

struct SobolevProducts {
  double l2_sq = 0.0;       // integral |f|^2
  double grad_l2_sq = 0.0;  // integral |grad f|^2
  double lap_l2_sq = 0.0;   // integral |Lap f|^2
  double h2_sq = 0.0;       // sum of the three
};

/// Squared L2 norms of f, grad f, Lap f via one transform; the H2 norm uses
/// the diagonal weight 1 + |k|^2 + |k|^4.
SobolevProducts sobolev_products(const Field& f);

/// Weighted spectral distance with weight 1 + |k|^2 + |k|^4 (H2 norm of a-b).
double h2_distance(const Field& a, const Field& b);

/// Relative Euler-Lagrange residual
/// ||gamma*Lap^2 u - beta*Lap u + alpha u - |u|^(2 sigma) u||_L2 / ||u||_H2.
double el_residual(const Params& p, const Field& u);

/// Pointwise |u|^(2 sigma) u. Clamps |u|^2 below 1e-300 to zero so fractional
/// powers behave at zeros of u.
Field nonlinear_term(const Field& u, double sigma);

/// 2/3-rule isotropic spectral truncation (zero modes with any axis
/// frequency above 2/3 of Nyquist).
Field dealias_two_thirds(const Field& f);

}  // namespace m4nls
