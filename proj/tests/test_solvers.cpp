#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "m4nls/analysis.hpp"
#include "m4nls/solvers.hpp"
#include "testutil.hpp"

using namespace m4nls;

TEST_CASE("petviashvili reproduces the exact sech^2 solution") {
  auto g = make_grid(1, 512, 80.0);
  Params p = test::exact_sech2_params();
  auto res = petviashvili_solve(p, gaussian_init(p, g));
  CHECK(res.converged);
  CHECK(res.iterations < 200);
  CHECK(res.el_residual < 1e-10);
  CHECK(std::abs(res.stabilizing_factor - 1.0) < 1e-10);
  Field exact = test::exact_sech2_profile(g);
  CHECK(aligned_linf_diff(exact, res.profile) < 1e-6);
  CHECK(res.mass == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("petviashvili started at the exact solution converges immediately") {
  auto g = make_grid(1, 512, 80.0);
  Params p = test::exact_sech2_params();
  Field exact = test::exact_sech2_profile(g);
  auto res = petviashvili_solve(p, exact);
  CHECK(res.converged);
  CHECK(res.iterations <= 2);
  CHECK(std::abs(res.stabilizing_factor - 1.0) < 1e-8);
}

TEST_CASE("petviashvili at gamma=0 recovers the classical soliton") {
  // L = 40 keeps the 2/3-rule cutoff high enough for the sech^3 tail
  auto g = make_grid(1, 512, 40.0);
  Params p;
  p.gamma = 0.0;
  p.beta = 1.0;
  p.alpha = 1.0;
  p.sigma = 1.0;
  p.dim = 1;
  auto res = petviashvili_solve(p, gaussian_init(p, g));
  CHECK(res.converged);
  Field sol = nls_soliton(1.0, 1.0, g);
  CHECK(aligned_linf_diff(sol, res.profile) < 1e-6);
}

TEST_CASE("petviashvili errors") {
  auto g = make_grid(1, 64, 20.0);
  Params p = test::exact_sech2_params();
  CHECK_THROWS_AS(petviashvili_solve(p, Field::zeros(g)), std::invalid_argument);
  Params bad = p;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(petviashvili_solve(bad, gaussian_init(p, g)), std::invalid_argument);
  Params sym = p;
  sym.beta = -3.0;
  sym.alpha = 1.0;  // beta < -2 sqrt(gamma alpha)
  CHECK_THROWS_AS(petviashvili_solve(sym, gaussian_init(p, g)), NumericalError);
}

TEST_CASE("converged profiles satisfy pohozaev and both multiplier forms") {
  auto g = make_grid(1, 512, 80.0);
  for (double beta : {5.0, 2.0}) {
    Params p = test::exact_sech2_params();
    p.beta = beta;
    auto res = petviashvili_solve(p, gaussian_init(p, g));
    REQUIRE(res.converged);
    CHECK(std::abs(pohozaev_residual(res.profile, p).relative) < 1e-6);
    auto lm = lagrange_multiplier(res.profile, p, res.mass);
    CHECK(lm.mismatch < 1e-10);
    CHECK(lm.alpha == doctest::Approx(p.alpha).epsilon(1e-6));
  }
}

TEST_CASE("2d petviashvili profile satisfies the identities") {
  auto g = make_grid(2, 64, 30.0);
  Params p;
  p.gamma = 1.0;
  p.beta = 5.0;
  p.alpha = 4.0;
  p.sigma = 1.0;
  p.dim = 2;
  auto res = petviashvili_solve(p, gaussian_init(p, g));
  CHECK(res.converged);
  CHECK(std::abs(pohozaev_residual(res.profile, p).relative) < 1e-6);
}

TEST_CASE("nls_soliton closed forms") {
  auto g = make_grid(1, 512, 60.0);
  Field s1 = nls_soliton(1.0, 1.0, g);
  CHECK(integrate_abs2(s1) == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(s1.max_abs() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  Params p1{0.0, 1.0, 1.0, 1.0, 1};
  CHECK(el_residual(p1, s1) < 1e-10);

  Field s4 = nls_soliton(4.0, 1.0, g);
  CHECK(integrate_abs2(s4) == doctest::Approx(8.0).epsilon(1e-10));
  Params p4{0.0, 1.0, 4.0, 1.0, 1};
  CHECK(el_residual(p4, s4) < 1e-10);

  Field s2 = nls_soliton(1.0, 2.0, g);
  CHECK(s2.max_abs() == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-12));
  Params p2{0.0, 1.0, 1.0, 2.0, 1};
  CHECK(el_residual(p2, s2) < 1e-10);

  auto g2 = make_grid(2, 32, 20.0);
  CHECK_THROWS_AS(nls_soliton(1.0, 1.0, g2), std::invalid_argument);
}

TEST_CASE("normalized gradient flow finds the small-gamma minimizer") {
  auto g = make_grid(1, 256, 60.0);
  Params p;
  p.gamma = 0.01;
  p.beta = 1.0;
  p.sigma = 1.0;
  p.dim = 1;
  Params seed = p;
  seed.alpha = 1.0;
  auto res = normalized_gradient_flow(p, 4.0, gaussian_init(seed, g));
  CHECK(res.converged);
  CHECK(res.functionals.energy < 0.0);
  CHECK(res.mass == doctest::Approx(4.0).epsilon(1e-12));
  // profile within O(gamma) of the classical soliton
  Field sol = nls_soliton(1.0, 1.0, g);
  CHECK(aligned_linf_diff(sol, res.profile) < 10.0 * p.gamma);
  CHECK(res.alpha == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("normalized gradient flow detects the subcritical-mass regime") {
  auto g = make_grid(1, 256, 40.0);
  Params p;
  p.gamma = 1.0;
  p.beta = 1.0;
  p.sigma = 3.0;
  p.dim = 1;
  Params seed = p;
  seed.alpha = 1.0;
  auto res = normalized_gradient_flow(p, 0.1, gaussian_init(seed, g));
  CHECK_FALSE(res.converged);
  CHECK(res.note == "no negative-energy minimizer detected");
  CHECK(res.functionals.energy > -1e-9);
}

TEST_CASE("normalized gradient flow restarted at its own output converges fast") {
  auto g = make_grid(1, 256, 60.0);
  Params p;
  p.gamma = 0.05;
  p.beta = 1.0;
  p.sigma = 1.0;
  p.dim = 1;
  Params seed = p;
  seed.alpha = 1.0;
  auto first = normalized_gradient_flow(p, 4.0, gaussian_init(seed, g));
  REQUIRE(first.converged);
  auto second = normalized_gradient_flow(p, first.mass, first.profile);
  CHECK(second.converged);
  CHECK(second.iterations < first.iterations / 4);
}

TEST_CASE("normalized gradient flow rejects supercritical sigma") {
  auto g = make_grid(1, 64, 20.0);
  Params p;
  p.gamma = 1.0;
  p.beta = 1.0;
  p.sigma = 4.1;
  p.dim = 1;
  CHECK_THROWS_AS(normalized_gradient_flow(p, 1.0, gaussian_init(p, g)), std::invalid_argument);
}

TEST_CASE("mass is pinned at every normalized iterate") {
  auto g = make_grid(1, 128, 40.0);
  Params p;
  p.gamma = 0.2;
  p.beta = 1.0;
  p.sigma = 1.0;
  p.dim = 1;
  GradientFlowOptions opt;
  opt.max_iter = 7;  // stop mid-flow
  opt.el_tol = 1e30;
  Params seed = p;
  seed.alpha = 1.0;
  auto res = normalized_gradient_flow(p, 2.7, gaussian_init(seed, g), opt);
  CHECK(res.mass == doctest::Approx(2.7).epsilon(1e-12));
}

TEST_CASE("fourier rearrangement: fixed point, translation invariance, norms") {
  auto g = make_grid(1, 128, 40.0);
  // a field whose spectrum is already radial-decreasing with nonnegative
  // coefficients: a centered Gaussian
  Field gauss = Field::from_function(g, [](double x, double, double) {
    return std::exp(-0.5 * x * x);
  });
  Field rg = fourier_rearrange(gauss);
  double diff = 0.0;
  for (std::size_t i = 0; i < gauss.size(); ++i)
    diff = std::max(diff, std::abs(rg.values[i] - gauss.values[i]));
  CHECK(diff < 1e-12);

  // phase stripping: a shifted copy rearranges to the same output
  double r[3] = {3.7, 0.0, 0.0};
  Field shifted = translate(gauss, r);
  Field rs = fourier_rearrange(shifted);
  diff = 0.0;
  for (std::size_t i = 0; i < gauss.size(); ++i)
    diff = std::max(diff, std::abs(rs.values[i] - rg.values[i]));
  CHECK(diff < 1e-10);

  // random field: mass preserved, gradient/laplacian norms not increased,
  // L4 norm not decreased
  Field f = test::random_smooth_field(g, 99, true);
  Field rf = fourier_rearrange(f);
  auto sf = sobolev_products(f);
  auto sr = sobolev_products(rf);
  CHECK(sr.l2_sq == doctest::Approx(sf.l2_sq).epsilon(1e-12));
  CHECK(sr.grad_l2_sq <= sf.grad_l2_sq * (1 + 1e-12));
  CHECK(sr.lap_l2_sq <= sf.lap_l2_sq * (1 + 1e-12));
  CHECK(integrate_abs_pow(rf, 4.0) >= integrate_abs_pow(f, 4.0) * (1 - 1e-12));
}

TEST_CASE("rearranging a converged even minimizer does not increase energy") {
  auto g = make_grid(1, 256, 60.0);
  Params p;
  p.gamma = 0.05;
  p.beta = 1.0;
  p.sigma = 1.0;
  p.dim = 1;
  Params seed = p;
  seed.alpha = 1.0;
  auto res = normalized_gradient_flow(p, 4.0, gaussian_init(seed, g));
  REQUIRE(res.converged);
  Field re = fourier_rearrange(res.profile);
  const double e0 = evaluate(res.profile, p).energy;
  const double e1 = evaluate(re, p).energy;
  CHECK(e1 <= e0 + 1e-10);
}

TEST_CASE("rescale_gamma") {
  auto g = make_grid(1, 512, 80.0);
  Field u = test::exact_sech2_profile(g);

  // gamma = 1: identity
  auto id = rescale_gamma(u, 1.0, 5.0);
  CHECK(id.theta == 5.0);
  CHECK(id.field.grid->length() == 80.0);

  // gamma = 16, 1d: mass halves
  auto r16 = rescale_gamma(u, 16.0, 5.0);
  CHECK(integrate_abs2(r16.field) == doctest::Approx(20.0 / 2.0).epsilon(1e-10));
  CHECK(r16.theta == doctest::Approx(5.0 / 4.0));

  // the exact solution maps to a solution of the unit-gamma equation
  auto rs = rescale_gamma(u, 1.0, 5.0);
  Params frame;
  frame.gamma = 1.0;
  frame.beta = rs.theta;
  frame.alpha = 4.0;
  frame.sigma = 1.0;
  frame.dim = 1;
  CHECK(el_residual(frame, rs.field) < 1e-8);

  CHECK_THROWS_AS(rescale_gamma(u, 0.0, 5.0), std::invalid_argument);
}

TEST_CASE("sign structure of converged profiles") {
  auto g = make_grid(1, 512, 80.0);
  Params pos = test::exact_sech2_params();  // beta = 5 >= 2 sqrt(gamma alpha) = 4
  auto rp = petviashvili_solve(pos, gaussian_init(pos, g));
  double mn = 1e300, mx = -1e300;
  for (const auto& v : rp.profile.values) {
    mn = std::min(mn, v.real());
    mx = std::max(mx, v.real());
  }
  const double flip = std::abs(mx) >= std::abs(mn) ? 1.0 : -1.0;
  CHECK(flip * mn >= -1e-9 * std::abs(mx));  // single-signed after normalization

  auto g2 = make_grid(1, 1024, 100.0);
  Params osc;  // beta = 0 < 2 sqrt(gamma alpha): sign-changing radial profile
  osc.gamma = 1.0;
  osc.beta = 0.0;
  osc.alpha = 1.0;
  osc.sigma = 1.0;
  osc.dim = 1;
  auto ro = petviashvili_solve(osc, gaussian_init(osc, g2));
  CHECK(ro.converged);
  double mn2 = 1e300, mx2 = -1e300;
  for (const auto& v : ro.profile.values) {
    mn2 = std::min(mn2, v.real());
    mx2 = std::max(mx2, v.real());
  }
  CHECK(mn2 * mx2 < 0.0);  // genuinely sign-changing
}
