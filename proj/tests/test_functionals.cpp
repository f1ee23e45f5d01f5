#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "m4nls/functionals.hpp"
#include "m4nls/solvers.hpp"
#include "testutil.hpp"

using namespace m4nls;

namespace {

GridPtr grid80() { return make_grid(1, 512, 80.0); }

Field soliton_sqrt2_sech(const GridPtr& g) {
  return Field::from_function(
      g, [](double x, double, double) { return std::sqrt(2.0) / std::cosh(x); });
}

}  // namespace

TEST_CASE("evaluate on the exact sech^2 profile") {
  auto g = grid80();
  Field u = test::exact_sech2_profile(g);
  Params p = test::exact_sech2_params();
  auto rec = evaluate(u, p, p.alpha);
  CHECK(rec.energy == doctest::Approx(-100.0 / 7.0).epsilon(1e-9));
  CHECK(rec.mass == doctest::Approx(20.0).epsilon(1e-10));
  CHECK(rec.lp_power == doctest::Approx(720.0 / 7.0).epsilon(1e-9));
  // invariants of the record
  CHECK(rec.action ==
        doctest::Approx(rec.quad_form / 2.0 - rec.lp_power / (2.0 * p.sigma + 2.0)));
  CHECK(rec.has_alpha);

  Field z = Field::zeros(g);
  auto zr = evaluate(z, p, p.alpha);
  CHECK(zr.energy == 0.0);
  CHECK(zr.mass == 0.0);
  CHECK(zr.lp_power == 0.0);
}

TEST_CASE("evaluate on the classical soliton") {
  auto g = grid80();
  Field u = soliton_sqrt2_sech(g);
  Params p;
  p.gamma = 0.0;
  p.beta = 1.0;
  p.sigma = 1.0;
  p.dim = 1;
  auto rec = evaluate(u, p);
  CHECK(rec.mass == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(rec.lp_power == doctest::Approx(16.0 / 3.0).epsilon(1e-10));
  CHECK_FALSE(rec.has_alpha);
}

TEST_CASE("pohozaev identity on the exact profile") {
  auto g = grid80();
  Field u = test::exact_sech2_profile(g);
  Params p = test::exact_sech2_params();
  auto rep = pohozaev_residual(u, p);
  // both sides equal 180/7
  CHECK(std::abs(rep.relative) < 1e-8);

  Field z = Field::zeros(g);
  CHECK(pohozaev_residual(z, p).defect == 0.0);

  // scaling breaks the identity: terms scale as l^2 and l^4, so the defect
  // of l*u equals (180/7) (l^2 - l^4), nonzero for l = 1.1
  Field scaled = u;
  for (auto& v : scaled.values) v *= 1.1;
  const double l2 = 1.1 * 1.1;
  CHECK(pohozaev_residual(scaled, p).defect ==
        doctest::Approx(180.0 / 7.0 * (l2 - l2 * l2)).epsilon(1e-8));
}

TEST_CASE("lagrange multiplier formulas") {
  auto g = grid80();
  Field u = test::exact_sech2_profile(g);
  Params p = test::exact_sech2_params();
  auto lm = lagrange_multiplier(u, p, 20.0);
  CHECK(lm.alpha == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(lm.mismatch < 1e-10);

  Field z = Field::zeros(g);
  auto lz = lagrange_multiplier(z, p, 1.0);
  CHECK(lz.alpha == 0.0);

  // classical soliton: alpha = 1 at mass 4
  Params q;
  q.gamma = 0.0;
  q.beta = 1.0;
  q.sigma = 1.0;
  q.dim = 1;
  auto ls = lagrange_multiplier(soliton_sqrt2_sech(g), q, 4.0);
  CHECK(ls.alpha == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ls.mismatch < 1e-10);

  CHECK_THROWS_AS(lagrange_multiplier(u, p, -1.0), std::invalid_argument);
}

TEST_CASE("recover_integrals reproduces the exact-solution integrals") {
  Params p = test::exact_sech2_params();
  auto rec = recover_integrals(-100.0 / 7.0, 4.0, 20.0, p);
  CHECK(rec.lap_sq == doctest::Approx(20.0 / 7.0).epsilon(1e-10));
  CHECK(rec.grad_sq == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(rec.lp_power == doctest::Approx(720.0 / 7.0).epsilon(1e-10));
}

TEST_CASE("recover_integrals matches the printed beta=1 formulas") {
  // closed formulas valid at beta = 1:
  //  lap = (sN-2s-2)/(2 s gamma) * 2I + (sN-2)/(2 s gamma) * alpha mu
  //  grad = (4s+4-sN)/(2s) * 2I + alpha mu (4-sN)/(2s)
  //  lp = (s+1)/s * (2I + alpha mu)
  for (double sigma : {0.7, 1.1, 1.3}) {  // keep away from sigma N = 2
    for (double gamma : {0.5, 1.0, 2.0}) {
      Params p;
      p.gamma = gamma;
      p.beta = 1.0;
      p.sigma = sigma;
      p.dim = 2;
      const double I = -0.37, alpha = 0.9, mu = 3.1;
      const double sN = sigma * p.dim;
      auto rec = recover_integrals(I, alpha, mu, p);
      const double lap =
          (sN - 2 * sigma - 2) / (2 * sigma * gamma) * 2 * I + (sN - 2) / (2 * sigma * gamma) * alpha * mu;
      const double grad = (4 * sigma + 4 - sN) / (2 * sigma) * 2 * I + alpha * mu * (4 - sN) / (2 * sigma);
      const double lp = (sigma + 1) / sigma * (2 * I + alpha * mu);
      CHECK(rec.lap_sq == doctest::Approx(lap).epsilon(1e-12));
      CHECK(rec.grad_sq == doctest::Approx(grad).epsilon(1e-12));
      CHECK(rec.lp_power == doctest::Approx(lp).epsilon(1e-12));
    }
  }
}

TEST_CASE("recover_integrals degenerate branch at sigma N = 2") {
  Params p;
  p.gamma = 1.0;
  p.beta = 1.0;
  p.sigma = 2.0;
  p.dim = 1;
  const double alpha = 0.8, mu = 2.5;
  auto rec = recover_integrals(0.0, alpha, mu, p);
  CHECK(rec.lp_power == doctest::Approx((p.sigma + 1.0) / p.sigma * alpha * mu).epsilon(1e-12));
  CHECK(rec.lp_power == doctest::Approx((p.sigma + 1.0) * rec.grad_sq).epsilon(1e-12));
  CHECK_THROWS_AS(recover_integrals(-0.5, alpha, mu, p), NumericalError);
}

TEST_CASE("gn_ratio: soliton extremizes the H1 form") {
  auto g = grid80();
  Field u = soliton_sqrt2_sech(g);
  const double r = gn_ratio(u, 1.0, GNForm::H1);
  CHECK(r == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-8));

  Field z = Field::zeros(g);
  CHECK_THROWS_AS(gn_ratio(z, 1.0, GNForm::H1), std::invalid_argument);
  CHECK_THROWS_AS(gn_ratio(u, 1.0, GNForm::mixed), std::invalid_argument);  // needs 2 < sN < 4
}

TEST_CASE("gn_ratio scale invariance") {
  auto g = grid80();
  Field u = test::random_smooth_field(g, 77);
  for (auto form : {GNForm::H2, GNForm::H1}) {
    const double r1 = gn_ratio(u, 1.0, form);
    Field v = u;
    for (auto& z : v.values) z *= 3.0;
    const double r3 = gn_ratio(v, 1.0, form);
    CHECK(std::abs(r3 - r1) / r1 < 1e-12);
    Field w = u;
    for (auto& z : w.values) z *= -0.37;
    CHECK(std::abs(gn_ratio(w, 1.0, form) - r1) / r1 < 1e-12);
  }
  // mixed form needs 2/N < sigma < 4/N; use sigma = 2.6 in 1d
  const double m1 = gn_ratio(u, 2.6, GNForm::mixed);
  Field v = u;
  for (auto& z : v.values) z *= 3.0;
  CHECK(std::abs(gn_ratio(v, 2.6, GNForm::mixed) - m1) / m1 < 1e-12);
}

TEST_CASE("critical mass formula") {
  // gamma -> 0 at fixed inputs: mu_c decreases monotonically to 0
  double prev = std::numeric_limits<double>::max();
  for (double gamma : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    const double mu = critical_mass_formula(gamma, 3.0, 1, 0.8);
    CHECK(mu < prev);
    CHECK(mu > 0.0);
    prev = mu;
  }
  // the decay is slow (mu_c ~ gamma^{1/6} for sigma=3, N=1) but tends to 0
  CHECK(critical_mass_formula(1e-30, 3.0, 1, 0.8) < 1e-3);

  // sigma = 2/N branch
  const double c = 0.55;
  CHECK(critical_mass_formula(1.0, 2.0, 1, c) ==
        doctest::Approx(std::pow(1.0 / (2.0 * c), 0.5)).epsilon(1e-12));

  CHECK_THROWS_AS(critical_mass_formula(1.0, 1.0, 1, 0.8), std::invalid_argument);
  CHECK_THROWS_AS(critical_mass_formula(1.0, 4.1, 1, 0.8), std::invalid_argument);
  CHECK_THROWS_AS(critical_mass_formula(1.0, 3.0, 1, -1.0), std::invalid_argument);
}

TEST_CASE("identity report on the exact profile") {
  auto g = grid80();
  Field u = test::exact_sech2_profile(g);
  Params p = test::exact_sech2_params();
  auto rep = identity_report(u, p);
  CHECK(rep.alpha == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(rep.el_residual < 1e-9);
  CHECK(std::abs(rep.pohozaev_residual) < 1e-8);
  CHECK(rep.defect_lap < 1e-8);
  CHECK(rep.defect_grad < 1e-8);
  CHECK(rep.defect_lp < 1e-8);
}
