#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "m4nls/core.hpp"
#include "testutil.hpp"

using namespace m4nls;
using test::Rng;

TEST_CASE("make_grid basics") {
  auto g = make_grid(1, 256, 40.0);
  CHECK(g->spacing() == doctest::Approx(0.15625).epsilon(1e-15));
  CHECK(g->size() == 256);
  // wavenumbers are multiples of 2 pi / 40
  CHECK(g->axis_wavenumber(1) == doctest::Approx(2.0 * M_PI / 40.0));
  CHECK(g->axis_wavenumber(255) == doctest::Approx(-2.0 * M_PI / 40.0));
  CHECK(g->spacing() * g->n() == doctest::Approx(g->length()));

  auto g2 = make_grid(2, 64, 20.0);
  CHECK(g2->size() == 4096);

  CHECK_THROWS_WITH_AS(make_grid(1, 15, 40.0), "n must be even", std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1, 8, 40.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1, 256, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(4, 32, 10.0), std::invalid_argument);
}

TEST_CASE("wavenumber table is odd-symmetric except Nyquist") {
  auto g = make_grid(1, 64, 17.0);
  for (int j = 1; j < 32; ++j)
    CHECK(g->axis_wavenumber(j) == doctest::Approx(-g->axis_wavenumber(64 - j)));
  CHECK(g->axis_wavenumber(32) == doctest::Approx(-32 * 2.0 * M_PI / 17.0));
}

TEST_CASE("transform round trip is identity") {
  auto g = make_grid(1, 128, 30.0);
  Field f = test::random_smooth_field(g, 11, true);
  auto coeffs = spectral_coefficients(f);
  Field back = field_from_coefficients(g, coeffs, f.kind);
  double err = 0.0, scale = f.max_abs();
  for (std::size_t i = 0; i < f.size(); ++i)
    err = std::max(err, std::abs(back.values[i] - f.values[i]));
  CHECK(err / scale < 1e-13);

  // real fields keep round-off level imaginary content
  Field r = test::random_smooth_field(g, 12, false);
  Field rr = field_from_coefficients(g, spectral_coefficients(r), FieldKind::real);
  CHECK(rr.relative_imag() < 1e-13);
}

TEST_CASE("apply_diff on eigenfunctions") {
  auto g = make_grid(1, 128, 40.0);
  const double k = 2.0 * M_PI / 40.0;
  Field f = Field::from_function(g, [&](double x, double, double) { return std::sin(k * x); });
  Field lap = apply_diff(f, DiffOp::laplacian);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(lap.values[i].real() == doctest::Approx(-k * k * f.values[i].real()).epsilon(1e-12));

  Field c = Field::from_function(g, [](double, double, double) { return 3.25; });
  CHECK(apply_diff(c, DiffOp::laplacian).max_abs() < 1e-13);
  CHECK(apply_diff(c, DiffOp::bilaplacian).max_abs() < 1e-13);
}

TEST_CASE("laplacian matches fourth-order finite differences on a Gaussian") {
  // h^4 truncation of the difference stencil needs a fine grid to reach 1e-8
  auto g = make_grid(1, 8192, 40.0);
  Field f = Field::from_function(g, [](double x, double, double) { return std::exp(-x * x); });
  Field lap = apply_diff(f, DiffOp::laplacian);
  Field fd = test::fd_laplacian_1d(f);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    err = std::max(err, std::abs(lap.values[i].real() - fd.values[i].real()));
  CHECK(err < 1e-8);
}

TEST_CASE("apply_diff rejects NaN") {
  auto g = make_grid(1, 32, 10.0);
  Field f = Field::zeros(g);
  f.values[3] = cplx(std::nan(""), 0.0);
  CHECK_THROWS_AS(apply_diff(f, DiffOp::laplacian), NumericalError);
}

TEST_CASE("bilaplacian equals laplacian applied twice") {
  auto g = make_grid(2, 48, 21.0);
  Field f = test::random_smooth_field(g, 5);
  Field once = apply_diff(apply_diff(f, DiffOp::laplacian), DiffOp::laplacian);
  Field twice = apply_diff(f, DiffOp::bilaplacian);
  double err = 0.0, scale = twice.max_abs();
  for (std::size_t i = 0; i < f.size(); ++i)
    err = std::max(err, std::abs(once.values[i] - twice.values[i]));
  CHECK(err / scale < 1e-12);
}

TEST_CASE("integrate: constants, sech powers, full periods") {
  auto g = make_grid(1, 512, 80.0);
  Field c = Field::from_function(g, [](double, double, double) { return 2.5; });
  CHECK(integrate(c) == doctest::Approx(2.5 * 80.0).epsilon(1e-14));

  // u = (sqrt(30)/2) sech^2(x/2): integral of u^2 = (30/4) * (8/3) = 20
  Field u = test::exact_sech2_profile(g);
  Field u2 = u;
  for (auto& v : u2.values) v *= v;
  CHECK(integrate(u2) == doctest::Approx(20.0).epsilon(1e-10));

  Field s = Field::from_function(
      g, [&](double x, double, double) { return std::sin(2.0 * M_PI * x / 80.0); });
  CHECK(std::abs(integrate(s)) < 1e-13);

  Field z = Field::zeros(g, FieldKind::complex);
  CHECK_THROWS_AS(integrate(z), std::invalid_argument);
}

TEST_CASE("sobolev products: plane wave, sech profile, zero") {
  auto g = make_grid(1, 256, 40.0);
  const double k = 6.0 * 2.0 * M_PI / 40.0;
  Field e = Field::from_complex_function(
      g, [&](double x, double, double) { return std::exp(cplx(0.0, k * x)); });
  auto sp = sobolev_products(e);
  CHECK(sp.grad_l2_sq == doctest::Approx(k * k * 40.0).epsilon(1e-12));
  CHECK(sp.l2_sq == doctest::Approx(40.0).epsilon(1e-12));

  auto g80 = make_grid(1, 512, 80.0);
  Field u = test::exact_sech2_profile(g80);
  auto su = sobolev_products(u);
  CHECK(su.grad_l2_sq == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(su.lap_l2_sq == doctest::Approx(20.0 / 7.0).epsilon(1e-8));

  Field z = Field::zeros(g);
  auto sz = sobolev_products(z);
  CHECK(sz.l2_sq == 0.0);
  CHECK(sz.h2_sq == 0.0);
}

TEST_CASE("Parseval consistency") {
  auto g = make_grid(1, 128, 25.0);
  Field f = test::random_smooth_field(g, 21, true);
  const double direct = integrate_abs2(f);
  const double viaspec = sobolev_products(f).l2_sq;
  CHECK(direct == doctest::Approx(viaspec).epsilon(1e-12));
}

TEST_CASE("invert_linear: diagonal action, zero mode, symbol violation") {
  auto g = make_grid(1, 128, 40.0);
  Params p;
  p.gamma = 1.0;
  p.beta = 5.0;
  p.alpha = 4.0;
  p.dim = 1;

  const double k = 4.0 * 2.0 * M_PI / 40.0;
  const double sym = p.gamma * k * k * k * k + p.beta * k * k + p.alpha;
  Field rhs = Field::from_complex_function(
      g, [&](double x, double, double) { return sym * std::exp(cplx(0.0, k * x)); });
  Field u = invert_linear(p, rhs);
  Field expect = Field::from_complex_function(
      g, [&](double x, double, double) { return std::exp(cplx(0.0, k * x)); });
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    err = std::max(err, std::abs(u.values[i] - expect.values[i]));
  CHECK(err < 1e-12);

  Field c = Field::from_function(g, [](double, double, double) { return 3.0; });
  Field uc = invert_linear(p, c);
  CHECK(uc.values[0].real() == doctest::Approx(3.0 / p.alpha).epsilon(1e-13));

  Params bad = p;
  bad.beta = -2.5;
  bad.alpha = 1.0;
  try {
    invert_linear(bad, c);
    FAIL("expected symbol violation");
  } catch (const NumericalError& e) {
    // minimum of k^4 - 2.5 k^2 + 1 sits near |k|^2 = 1.25
    const std::string msg = e.what();
    CHECK(msg.find("not positive") != std::string::npos);
    CHECK(msg.find("|k|^2") != std::string::npos);
  }
}

TEST_CASE("invert_linear is a right inverse of the forward operator") {
  auto g = make_grid(2, 32, 18.0);
  Params p;
  p.gamma = 0.7;
  p.beta = 1.2;
  p.alpha = 2.0;
  p.dim = 2;
  Field f = test::random_smooth_field(g, 33);
  Field back = apply_linear_operator(p, invert_linear(p, f));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    num += std::norm(back.values[i] - f.values[i]);
    den += std::norm(f.values[i]);
  }
  CHECK(std::sqrt(num / den) < 1e-12);
}

TEST_CASE("symbol violation scan matches the continuous minimum") {
  auto g = make_grid(1, 256, 40.0);
  Params p;
  p.gamma = 1.0;
  p.beta = -2.5;
  p.alpha = 1.0;
  p.dim = 1;
  auto bad = symbol_violation(p, *g);
  REQUIRE(bad.has_value());
  CHECK(bad->first == doctest::Approx(1.25).epsilon(0.05));
  CHECK(bad->second <= 0.0);

  Params ok = p;
  ok.beta = -1.99;  // still above -2 sqrt(gamma alpha) = -2
  CHECK_FALSE(symbol_violation(ok, *g).has_value());
}

TEST_CASE("dealias keeps low modes and kills the top third") {
  auto g = make_grid(1, 96, 30.0);
  Field f = test::random_smooth_field(g, 44);
  Field d = dealias_two_thirds(f);
  auto cf = spectral_coefficients(f);
  auto cd = spectral_coefficients(d);
  for (int j = 0; j < 96; ++j) {
    const int m = j < 48 ? j : j - 96;
    if (std::abs(m) > 32) {
      CHECK(std::abs(cd[std::size_t(j)]) < 1e-12);
    } else {
      CHECK(std::abs(cd[std::size_t(j)] - cf[std::size_t(j)]) < 1e-12);
    }
  }
}

TEST_CASE("derivative_axis zeroes the Nyquist mode") {
  auto g = make_grid(1, 32, 10.0);
  // pure Nyquist signal: alternating +-1
  Field f = Field::zeros(g);
  for (int i = 0; i < 32; ++i) f.values[std::size_t(i)] = (i % 2 == 0) ? 1.0 : -1.0;
  Field d = derivative_axis(f, 0);
  CHECK(d.max_abs() < 1e-13);
}
