#pragma once

#include <span>
#include <vector>

#include "qcoll/collocation.hpp"
#include "qcoll/market_surface.hpp"

namespace qcoll {

// Collocation orders: N1 for the FX map, N2 for the equity map.
struct CollocationOrders {
  int fx = 7;
  int equity = 7;
};

// Strike-independent pricing state for one maturity. Coefficient vectors act
// on standard-normal drivers: X_T ~ a1(Z1), S_T ~ a2(Z2), E[X_T | Z2] ~ b(Z2)
// and X_T * S_T conditioned on Z2 ~ c(Z2).
//
// a1 and a2 are the Vandermonde fits with the constant term shifted so that
// E[a(Z)] equals the exact forward. Node values move by that (tiny) shift.
class QuantoContext {
 public:
  double maturity() const { return T_; }
  double rho() const { return rho_; }
  double spot_X() const { return spot_X_; }
  double fx_forward() const { return fx_forward_; }
  double equity_forward() const { return equity_forward_; }
  double domestic_discount() const { return domestic_discount_; }
  double foreign_discount() const { return foreign_discount_; }

  const MarginalDistribution& fx_marginal() const { return fx_; }
  const MarginalDistribution& equity_marginal() const { return equity_; }
  int fx_order() const { return static_cast<int>(a1_.size()); }
  int equity_order() const { return static_cast<int>(a2_.size()); }

  const PolyCoeffs& a1() const { return a1_; }
  const PolyCoeffs& a2() const { return a2_; }
  const PolyCoeffs& b() const { return b_; }
  const PolyCoeffs& c() const { return c_; }

  // Forward-matching shifts applied to the constant terms of a1 and a2.
  double fx_mean_shift() const { return fx_shift_; }
  double equity_mean_shift() const { return equity_shift_; }
  // Smallest slope of the fitted maps on [-4, 4]; negative means the
  // polynomial is not monotone there.
  double fx_min_slope() const;
  double equity_min_slope() const;

  // Same marginal fits, b and c recomputed for a new correlation.
  QuantoContext with_correlation(double rho) const;

 private:
  friend QuantoContext build_context(const MarketSetup&, const VolSurface&, const VolSurface&,
                                     double, CollocationOrders);
  QuantoContext(MarginalDistribution fx, MarginalDistribution equity)
      : fx_(std::move(fx)), equity_(std::move(equity)) {}

  double T_ = 0.0;
  double rho_ = 0.0;
  double spot_X_ = 1.0;
  double fx_forward_ = 1.0;
  double equity_forward_ = 1.0;
  double domestic_discount_ = 1.0;
  double foreign_discount_ = 1.0;
  double fx_shift_ = 0.0;
  double equity_shift_ = 0.0;
  MarginalDistribution fx_;
  MarginalDistribution equity_;
  PolyCoeffs a1_;
  PolyCoeffs a2_;
  PolyCoeffs b_;
  PolyCoeffs c_;
};

// Fits both marginals at T and precomputes b and c. The surfaces must have
// been built from `setup` (same spots and drifts).
QuantoContext build_context(const MarketSetup& setup, const VolSurface& equity,
                            const VolSurface& fx, double T, CollocationOrders orders = {});

// m_i(kappa) = E[Z^i | Z > kappa] for i < N, by the two-term hazard-ratio
// recursion. Phi and phi are evaluated once.
struct TruncatedMoments {
  double kappa = 0.0;
  double survival = 1.0;  // 1 - Phi(kappa)
  double hazard = 0.0;    // phi(kappa) / (1 - Phi(kappa))
  std::vector<double> m;
};

// |kappa| <= 12, 1 <= N <= 31; throws DomainError otherwise.
TruncatedMoments truncated_moments(double kappa, int N);

// e_n(K) = c_n - K b_n [n < N1] - X0 a2_n [n < N2] + X0 K [n = 0].
std::vector<double> spread_coeffs(const QuantoContext& ctx, double K);

inline constexpr double kKappaClamp = 8.0;

struct SpreadValue {
  // E_F[(X_T - X0)(S_T - K)+], undiscounted.
  double value = 0.0;
  double kappa = 0.0;
  bool kappa_clamped = false;
  bool deep_otm = false;
};

SpreadValue quanto_vanilla_spread(const QuantoContext& ctx, double K);

struct QuantoQuote {
  double strike = 0.0;
  double quanto_call = 0.0;   // domestic-currency present value
  double vanilla_call = 0.0;  // foreign-currency present value, B_F E_F[(S-K)+]
  SpreadValue spread;
};

QuantoQuote price_quanto(const QuantoContext& ctx, double K);
// One context, many strikes: the per-strike work is one CDF, one normal
// inversion, one moment recursion and one dot product.
std::vector<QuantoQuote> price_strikes(const QuantoContext& ctx, std::span<const double> strikes);

// B_D E_D[(S_T - K)+] = B_F (spread / X0 + E_F[(S_T - K)+]), floored at zero.
double quanto_call(const QuantoContext& ctx, double K);

// E_D[S_T] = E_F[X_T S_T] / E_F[X_T] from the c coefficients.
double quanto_forward(const QuantoContext& ctx);

struct CorrelationFit {
  double rho = 0.0;
  double residual = 0.0;  // quanto_forward(rho) - target
  int iterations = 0;
};

// Correlation whose collocation quanto forward equals `target`. Scans nine
// correlations on [-0.999, 0.999] to confirm monotonicity and bracket the root.
// Throws UnattainableForwardError with the attainable interval.
CorrelationFit implied_correlation(const MarketSetup& setup, const VolSurface& equity,
                                   const VolSurface& fx, double T, double target,
                                   CollocationOrders orders = {});
CorrelationFit implied_correlation(const QuantoContext& ctx, double target);

// Black implied vol of an undiscounted call. Throws BoundViolationError if the
// price lies outside [(F - K)+, F].
double implied_vol_of(double price, double forward, double K, double T);

// Legacy constant-drift quanto: Black with forward S0 exp((r_F - delta +
// rho sigma_S^ATM sigma_X^ATM) T) and the equity smile vol at K; domestic PV.
double adhoc_quanto_price(const MarketSetup& setup, const VolSurface& equity, const VolSurface& fx,
                          double T, double K);
double adhoc_quanto_forward(const MarketSetup& setup, const VolSurface& equity,
                            const VolSurface& fx, double T);

}  // namespace qcoll
