#pragma once

#include <memory>
#include <string_view>
#include <vector>

namespace qcoll {

enum class Asset { Equity, Fx };

std::string_view to_string(Asset asset);

// Flat-rate two-currency market. The equity trades in the foreign currency;
// spot_X counts foreign units per one domestic unit.
struct MarketSetup {
  double spot_S = 100.0;
  double spot_X = 1.0;
  double r_F = 0.0;
  double r_D = 0.0;
  double div_yield = 0.0;
  double rho = 0.0;

  // Throws InputError on non-positive spots, non-finite rates or |rho| > 1.
  void validate() const;

  double domestic_discount(double T) const;
  double foreign_discount(double T) const;
  // Continuous drift of the asset under the foreign measure.
  double drift(Asset asset) const;
  double spot(Asset asset) const;

  MarketSetup with_rho(double new_rho) const;
};

// S_0 exp((r_F - delta) T) or X_0 exp((r_F - r_D) T). Rejects T < 0.
double forward(const MarketSetup& setup, Asset asset, double T);

// Quadratic smile in forward log-moneyness k = ln(K / F(T)):
//   sigma(k) = atm_vol + skew * k + curvature * k^2
// applied on [ln(strike_lo / F), ln(strike_hi / F)] and held flat outside.
struct SmileParams {
  double atm_vol = 0.2;
  double skew = 0.0;
  double curvature = 0.0;
};

struct SmilePillar {
  double maturity = 1.0;
  SmileParams params;
  double strike_lo = 0.0;
  double strike_hi = 0.0;
};

struct StrikeBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Total implied variance w = sigma^2 T at one (k, T) with its partials.
struct VarianceSlice {
  double w = 0.0;
  double w_k = 0.0;
  double w_kk = 0.0;
  double w_t = 0.0;
};

class MarginalDistribution;

// Immutable implied-vol surface for one asset under the foreign measure.
// Pillars are joined by linear interpolation of total variance in T at fixed
// forward log-moneyness; before the first and after the last pillar the
// pillar's implied-vol smile is held constant in T. The k-range of the strike
// bounds is interpolated linearly between pillars and frozen outside them;
// beyond it the smile is flat in k.
class VolSurface {
 public:
  // Validates the pillars: positive vols on the declared bounds, positive
  // risk-neutral density (no butterfly arbitrage), non-decreasing total
  // variance across pillars, and at least 99.9% of the mass inside the
  // bounds. Throws InputError or ArbitrageError.
  VolSurface(const MarketSetup& setup, Asset asset, std::vector<SmilePillar> pillars);

  Asset asset() const;
  double spot() const;
  double drift() const;
  double forward(double T) const;
  const std::vector<SmilePillar>& pillars() const;

  // Strike range searched by quantile inversion at maturity T.
  StrikeBounds bounds(double T) const;

  VarianceSlice variance(double k, double T) const;
  double implied_vol(double K, double T) const;
  // Undiscounted foreign-measure call E_F[(Y_T - K)+] from the Black formula.
  double call_price(double K, double T) const;
  // Dupire local vol in total-variance form. Throws ArbitrageError when the
  // density term or the calendar slope is non-positive at (K, t).
  double local_vol(double K, double t) const;

  MarginalDistribution marginal(double T) const;

  struct Data;

 private:
  std::shared_ptr<const Data> data_;
};

// Result of a quantile inversion; `saturated` marks a target probability
// beyond the mass of the strike bounds, in which case `strike` is the edge.
struct QuantileResult {
  double strike = 0.0;
  bool saturated = false;
};

// The maturity-T marginal of a VolSurface, with CDF derived analytically from
// the call prices: F(K) = 1 + dC/dK including the smile slope (vega) term.
class MarginalDistribution {
 public:
  MarginalDistribution(std::shared_ptr<const VolSurface::Data> data, double T);

  double maturity() const { return T_; }
  double forward() const { return forward_; }
  StrikeBounds bounds() const { return bounds_; }
  Asset asset() const;

  double cdf(double K) const;
  // 1 - cdf(K), evaluated directly so the upper tail keeps relative precision.
  double survival(double K) const;
  // Risk-neutral density (Breeden-Litzenberger) at K.
  double density(double K) const;
  double call_price(double K) const;
  double implied_vol(double K) const;

  // Smallest K with cdf(K) >= q; q must be in (0, 1).
  QuantileResult quantile(double q) const;
  // g(z) = F^{-1}(Phi(z)) solved in the tail that keeps precision.
  QuantileResult quantile_of_normal(double z) const;
  // g^{-1}(K) = Phi^{-1}(F(K)), infinite only if the CDF under/overflows.
  double to_normal(double K) const;

 private:
  // Unclamped, in forward log-moneyness k.
  VarianceSlice variance(double k) const;
  double raw_cdf(double k) const;
  double raw_survival(double k) const;
  double density_k(double k) const;
  QuantileResult solve(double p, bool upper) const;

  std::shared_ptr<const VolSurface::Data> data_;
  double T_;
  double forward_;
  StrikeBounds bounds_;
  double k_lo_ = 0.0;
  double k_hi_ = 0.0;
};

}  // namespace qcoll
