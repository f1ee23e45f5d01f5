#pragma once

#include <cmath>
#include <cstdint>

#include "m4nls/core.hpp"

namespace m4nls::test {

inline double sech(double x) { return 1.0 / std::cosh(x); }

/// Exact profile A sech^2(x/2) solving u'''' - 5 u'' + 4 u = u^3,
/// with A = sqrt(30)/2. Mass 20, |grad|^2 = 4, |lap|^2 = 20/7,
/// |u|^4_4 = 720/7, E = -100/7 for gamma=1, beta=5.
inline Field exact_sech2_profile(const GridPtr& grid) {
  const double amp = std::sqrt(30.0) / 2.0;
  return Field::from_function(grid, [amp](double x, double, double) {
    const double s = sech(0.5 * x);
    return amp * s * s;
  });
}

inline Params exact_sech2_params() {
  Params p;
  p.gamma = 1.0;
  p.beta = 5.0;
  p.alpha = 4.0;
  p.sigma = 1.0;
  p.dim = 1;
  return p;
}

/// Deterministic pseudo-random stream for reproducible property tests.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  double uniform() {  // in [-1, 1)
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z = z ^ (z >> 31);
    return 2.0 * (double(z >> 11) * 0x1.0p-53) - 1.0;
  }
};

/// Smooth decayed random field: a few random Gaussian bumps.
inline Field random_smooth_field(const GridPtr& grid, std::uint64_t seed, bool complex_valued = false) {
  Rng rng(seed);
  const int bumps = 4;
  double cx[bumps], cw[bumps], ca[bumps], cb[bumps];
  for (int b = 0; b < bumps; ++b) {
    cx[b] = 0.25 * grid->length() * rng.uniform();
    cw[b] = 0.5 + 0.4 * rng.uniform();
    ca[b] = rng.uniform();
    cb[b] = rng.uniform();
  }
  auto fn = [&](double x, double y, double z) {
    cplx acc(0.0, 0.0);
    const double r2base = y * y + z * z;
    for (int b = 0; b < bumps; ++b) {
      const double dx = x - cx[b];
      const double g = std::exp(-(dx * dx + r2base) / (2.0 * cw[b] * cw[b]));
      acc += cplx(ca[b], complex_valued ? cb[b] : 0.0) * g;
    }
    return acc;
  };
  Field f = Field::from_complex_function(grid, fn);
  if (!complex_valued) f.force_real();
  return f;
}

/// Fourth-order centered finite differences for the 1d Laplacian (periodic).
inline Field fd_laplacian_1d(const Field& f) {
  const int n = f.grid->n();
  const double h = f.grid->spacing();
  Field out = f;
  for (int i = 0; i < n; ++i) {
    auto at = [&](int j) { return f.values[std::size_t((j % n + n) % n)].real(); };
    out.values[std::size_t(i)] =
        (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2)) /
        (12.0 * h * h);
  }
  return out;
}

}  // namespace m4nls::test
