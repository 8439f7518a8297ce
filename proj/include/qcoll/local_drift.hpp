#pragma once

#include <vector>

#include "qcoll/collocation.hpp"
#include "qcoll/market_surface.hpp"

namespace qcoll {

inline constexpr double kConditionalVolFloor = 1e-6;

// nu_t(x_i) = g1(x_i) / X0 * sigma_X(g1(x_i), t) * B_F / B_D at each node: the
// FX local vol weighted by the foreign-to-domestic measure change.
std::vector<double> nu_values(const VolSurface& fx, const MarketSetup& setup, double t,
                              const CollocationBasis& basis);

// One time slice of the projected quanto drift. With L = X_t / E_F[X_t] the
// measure-change weight, sigma_XS(S, t) = E_D[sigma_X | S_t = S]
//   = E_F[L sigma_X | S_t = S] / E_F[L | S_t = S] = b_t(z_S) / w_t(z_S),
// z_S = g2^{-1}(S) from the equity marginal at t. Both polynomials come from
// the same N_t nodes; for a flat FX vol the ratio is exactly sigma_X.
class DriftSlice {
 public:
  double time() const { return t_; }
  int order() const { return static_cast<int>(a_.size()); }
  double rho() const { return rho_; }
  double measure_ratio() const { return measure_ratio_; }
  const PolyCoeffs& a() const { return a_; }
  const PolyCoeffs& b() const { return b_; }
  // Conditioned weight polynomial E_F[L | Z2 = z] and its unconditioned fit.
  const PolyCoeffs& weight_a() const { return weight_a_; }
  const PolyCoeffs& weight_b() const { return weight_b_; }
  const MarginalDistribution& equity_marginal() const { return equity_; }

  // Minimum of sigma_XS over z in [-4, 4]; at or below zero the floor will engage.
  double min_value() const { return min_value_; }
  bool has_negative_region() const { return min_value_ <= 0.0; }

 private:
  friend DriftSlice fit_drift_slice(const VolSurface&, const VolSurface&, const MarketSetup&,
                                    double, int);
  explicit DriftSlice(MarginalDistribution equity) : equity_(std::move(equity)) {}

  double t_ = 0.0;
  double rho_ = 0.0;
  double measure_ratio_ = 1.0;
  double min_value_ = 0.0;
  MarginalDistribution equity_;
  PolyCoeffs a_;
  PolyCoeffs b_;
  PolyCoeffs weight_a_;
  PolyCoeffs weight_b_;
};

// Requires 2 <= N_t <= 10.
DriftSlice fit_drift_slice(const VolSurface& fx, const VolSurface& equity, const MarketSetup& setup,
                           double t, int N_t);

struct ConditionalVol {
  double value = 0.0;
  bool floored = false;
};

// sigma_XS(S, t), floored at 1e-6. S must lie inside the equity strike bounds at t.
ConditionalVol conditional_fx_vol_checked(const DriftSlice& slice, double S);
double conditional_fx_vol(const DriftSlice& slice, double S);

// rho * sigma_S(S, t) * sigma_XS(S, t), per year.
double quanto_local_drift(const DriftSlice& slice, const VolSurface& equity, double S, double t);

}  // namespace qcoll
