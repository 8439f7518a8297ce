#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "qcoll/errors.hpp"
#include "qcoll/normal.hpp"
#include "qcoll/oracles.hpp"

using namespace qcoll;
using qcoll::testing::fixture;
using qcoll::testing::flat_market;
using qcoll::testing::plain_setup;

TEST_CASE("trapezoid grid integrates the normal density") {
  const Market flat = flat_market(plain_setup(0.5), 0.2, 0.1);
  const CopulaOracle orc(flat.setup, flat.equity, flat.fx, 1.0);
  double mass = 0.0;
  for (double z : orc.grid()) mass += orc.trapezoid_weight() * norm_pdf(z);
  CHECK(std::abs(mass - 1.0) < 1e-12);
  CHECK(orc.grid().size() == 400);
}

TEST_CASE("closed-form lognormal quanto") {
  const MarketSetup s = plain_setup(0.7);
  CHECK(closed_form_lognormal_quanto(s, 0.2, 0.1, 2.0, 100.0) == doctest::Approx(12.87).epsilon(1e-3));
  const double vanilla = black_call(100.0, 110.0, 0.2 * std::sqrt(2.0));
  CHECK(closed_form_lognormal_quanto(plain_setup(0.0), 0.2, 0.1, 2.0, 110.0) == doctest::Approx(vanilla).epsilon(1e-15));
  CHECK(closed_form_lognormal_quanto(s, 0.2, 0.0, 2.0, 110.0) == doctest::Approx(vanilla).epsilon(1e-15));
}

TEST_CASE("copula quadrature reduces to closed forms") {
  MarketSetup s = plain_setup(0.0);
  s.r_F = s.r_D = 0.015;
  const Market ind = flat_market(s, 0.2, 0.1);
  for (double K : {70.0, 100.0, 140.0}) {
    const double vanilla = s.domestic_discount(2.0) * ind.equity.call_price(K, 2.0);
    CHECK(copula_quanto_price(s, ind.equity, ind.fx, 2.0, K).value == doctest::Approx(vanilla).epsilon(1e-8));
  }

  for (double rho : {-0.8, 0.0, 0.7}) {
    const Market flat = flat_market(plain_setup(rho), 0.2, 0.1);
    const CopulaOracle orc(flat.setup, flat.equity, flat.fx, 2.0);
    for (double K : {60.0, 100.0, 140.0}) {
      const OracleValue v = orc.quanto_price(K);
      CHECK(v.value == doctest::Approx(closed_form_lognormal_quanto(flat.setup, 0.2, 0.1, 2.0, K)).epsilon(1e-8));
      CHECK(v.error_estimate < 1e-8 * v.value);
      CHECK(v.tail_mass < 1e-12);
    }
    CHECK(orc.quanto_forward() == doctest::Approx(100.0 * std::exp(rho * 0.02 * 2.0)).epsilon(1e-10));
  }
}

TEST_CASE("copula quadrature converges under node doubling") {
  for (const std::string& name : qcoll::testing::skewed_fixtures()) {
    const Market mk = fixture(name);
    const CopulaOracle a(mk.setup, mk.equity, mk.fx, 2.0, {400, 8.0});
    const CopulaOracle b(mk.setup, mk.equity, mk.fx, 2.0, {800, 8.0});
    for (double pct : {0.6, 1.0, 1.4}) {
      const double K = pct * mk.setup.spot_S;
      const double va = a.quanto_price(K).value, vb = b.quanto_price(K).value;
      CHECK_MESSAGE(std::abs(va / vb - 1.0) < 1e-8, name << " K=" << K);
    }
    CHECK(a.fx_mean() == doctest::Approx(forward(mk.setup, Asset::Fx, 2.0)).epsilon(1e-9));
    CHECK(a.equity_mean() == doctest::Approx(forward(mk.setup, Asset::Equity, 2.0)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(CopulaOracle(plain_setup(0.1), fixture("flat").equity, fixture("flat").fx, 1.0, {8, 8.0}),
                  DomainError);
}

TEST_CASE("exact conditional FX expectation") {
  MarketSetup s = plain_setup(0.0);
  s.r_F = 0.02;
  const Market ind = flat_market(s, 0.2, 0.1);
  const double mean = forward(s, Asset::Fx, 1.5) / s.spot_X;
  for (double S : {60.0, 100.0, 160.0})
    CHECK(exact_conditional_fx(s, ind.equity, ind.fx, 1.5, S) == doctest::Approx(mean).epsilon(1e-12));

  // Bivariate lognormal: E[X/X0 | S] = (F_X/X0) (S / F_S)^(rho sx/ss) times a constant.
  const MarketSetup c = plain_setup(0.6);
  const Market flat = flat_market(c, 0.25, 0.1);
  const double T = 2.0;
  const double ts = 0.25 * std::sqrt(T), tx = 0.1 * std::sqrt(T);
  const CopulaOracle orc(c, flat.equity, flat.fx, T);
  for (double S : {50.0, 80.0, 100.0, 130.0, 200.0}) {
    const double z = (std::log(S / 100.0) + 0.5 * ts * ts) / ts;
    const double expected = std::exp(0.6 * tx * z - 0.5 * 0.36 * tx * tx);
    CHECK(orc.conditional_fx_ratio(S) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(orc.conditional_fx_vol(S) == doctest::Approx(0.1).epsilon(1e-12));
  }

  // Perfect correlation takes the direct branch.
  const Market one = flat_market(plain_setup(1.0), 0.25, 0.1);
  const CopulaOracle det(one.setup, one.equity, one.fx, T);
  const double z = (std::log(130.0 / 100.0) + 0.5 * ts * ts) / ts;
  CHECK(det.conditional_fx_ratio(130.0) == doctest::Approx(std::exp(tx * z - 0.5 * tx * tx)).epsilon(1e-10));
}

TEST_CASE("Monte Carlo: flat-vol and independence checks within three standard errors") {
  const Market flat = flat_market(plain_setup(0.7), 0.2, 0.1);
  McSpec spec;
  spec.paths = std::uint64_t{1} << 18;
  const double strikes[] = {80.0, 100.0, 120.0};
  const auto est = mc_quanto_prices(flat.setup, flat.equity, flat.fx, 2.0, strikes, spec);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(est[i].paths == spec.paths);
    CHECK(est[i].std_error > 0.0);
    CHECK(std::abs(est[i].price - closed_form_lognormal_quanto(flat.setup, 0.2, 0.1, 2.0, strikes[i])) <
          3.0 * est[i].std_error);
  }

  MarketSetup s = plain_setup(0.0);
  s.r_F = s.r_D = 0.02;
  const Market ind = flat_market(s, 0.2, 0.1);
  const McEstimate v = mc_quanto_price(s, ind.equity, ind.fx, 1.0, 100.0, spec);
  CHECK(std::abs(v.price - s.domestic_discount(1.0) * ind.equity.call_price(100.0, 1.0)) < 3.0 * v.std_error);
}

TEST_CASE("Monte Carlo results do not depend on the worker count") {
  const Market mk = fixture("mixed");
  McSpec one;
  one.paths = 1 << 14;
  one.workers = 1;
  McSpec many = one;
  many.workers = 5;
  const McEstimate a = mc_quanto_price(mk.setup, mk.equity, mk.fx, 0.5, 100.0, one);
  const McEstimate b = mc_quanto_price(mk.setup, mk.equity, mk.fx, 0.5, 100.0, many);
  CHECK(a.price == b.price);
  CHECK(a.std_error == b.std_error);
  McSpec other = one;
  other.seed = 7;
  CHECK(mc_quanto_price(mk.setup, mk.equity, mk.fx, 0.5, 100.0, other).price != a.price);

  McSpec tiny = one;
  tiny.paths = 512;
  CHECK_THROWS_AS(mc_quanto_price(mk.setup, mk.equity, mk.fx, 0.5, 100.0, tiny), DomainError);
}

TEST_CASE("Monte Carlo agrees with copula quadrature on a skewed market") {
  const Market mk = fixture("neg_skew");
  McSpec spec;
  spec.paths = std::uint64_t{1} << 17;
  spec.steps_per_year = 50;
  const double T = 1.0;
  const double strikes[] = {0.9 * mk.setup.spot_S, mk.setup.spot_S, 1.1 * mk.setup.spot_S};
  const auto est = mc_quanto_prices(mk.setup, mk.equity, mk.fx, T, strikes, spec);
  const CopulaOracle orc(mk.setup, mk.equity, mk.fx, T);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(est[i].price - orc.quanto_price(strikes[i]).value) < 3.0 * est[i].std_error);
}
