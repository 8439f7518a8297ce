#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcoll/market_surface.hpp"

namespace qcoll {

// Reference implementations. Slow and exact (up to quadrature or sampling
// error); used by the tests and the CLI's oracle columns, never by pricing.

// Trapezoid grid on [-z_max, z_max] for each Gaussian driver.
struct QuadratureSpec {
  int nodes = 400;
  double z_max = 8.0;
};

struct OracleValue {
  double value = 0.0;
  double error_estimate = 0.0;
  // Probability mass of each marginal beyond its strike bounds, which the
  // quantile maps saturate to the edge.
  double tail_mass = 0.0;
};

// 2-D Gaussian-copula integration over exact quantile maps g1 (FX) and g2
// (equity) at one maturity. Immutable after construction.
class CopulaOracle {
 public:
  CopulaOracle(const MarketSetup& setup, const VolSurface& equity, const VolSurface& fx, double T,
               QuadratureSpec spec = {});

  double maturity() const { return T_; }
  double rho() const { return setup_.rho; }
  std::span<const double> grid() const { return z_; }
  double trapezoid_weight() const { return h_; }

  // E_F[X_T | Z2 = z].
  double conditional_fx(double z) const;
  // E_D[sigma_X(X_T, T) | Z2 = z] = E_F[X_T sigma_X | z] / E_F[X_T | z].
  double conditional_fx_vol_at(double z) const;

  // E_F[X_T] and E_F[S_T] by quadrature (should match the forwards).
  double fx_mean() const { return fx_mean_; }
  double equity_mean() const { return equity_mean_; }
  // E_F[X_T S_T] / E_F[X_T].
  double quanto_forward() const { return xs_mean_ / fx_mean_; }

  // Domestic present value B_F E_F[X_T / X0 (S_T - K)+].
  OracleValue quanto_price(double K) const;

  // E_F[X_T / X0 | S_T = S].
  double conditional_fx_ratio(double S) const;
  // sigma_XS(S, T) = E_D[sigma_X(X_T, T) | S_T = S] by conditional integration.
  double conditional_fx_vol(double S) const;

 private:
  double conditional(std::span<const double> table, double z, bool vol_table) const;
  double fx_quantile(double z) const;
  double nu_exact(double z) const;
  double outer_integral(double kappa, double K, int panels, int points, bool put) const;

  MarketSetup setup_;
  double T_;
  QuadratureSpec spec_;
  MarginalDistribution fx_;
  MarginalDistribution equity_;
  VolSurface fx_surface_;
  double h_;
  std::vector<double> z_;
  std::vector<double> g1_;
  std::vector<double> g2_;
  std::vector<double> nu_;
  double fx_mean_ = 0.0;
  double equity_mean_ = 0.0;
  double xs_mean_ = 0.0;
  double tail_mass_ = 0.0;
};

OracleValue copula_quanto_price(const MarketSetup& setup, const VolSurface& equity,
                                const VolSurface& fx, double T, double K, QuadratureSpec spec = {});

// E_F[X_T / X0 | S_T = S] by 1-D quadrature over Z1 | Z2 = g2^{-1}(S).
double exact_conditional_fx(const MarketSetup& setup, const VolSurface& equity,
                            const VolSurface& fx, double T, double S, QuadratureSpec spec = {});

// Flat-vol quanto: B_D Black(F_S exp(rho sigma_S sigma_X T), K, sigma_S).
double closed_form_lognormal_quanto(const MarketSetup& setup, double sigma_S, double sigma_X,
                                    double T, double K);

struct McSpec {
  std::uint64_t paths = std::uint64_t{1} << 20;
  int steps_per_year = 100;
  std::uint64_t seed = 20190325;
  // 0 = one worker per hardware thread. Results do not depend on this.
  unsigned workers = 0;
};

struct McEstimate {
  double price = 0.0;
  double std_error = 0.0;
  std::uint64_t paths = 0;
};

// Two-factor local-vol Monte Carlo under the domestic measure, log-Euler,
// vols evaluated at mid-step times. Domestic present values per strike.
std::vector<McEstimate> mc_quanto_prices(const MarketSetup& setup, const VolSurface& equity,
                                         const VolSurface& fx, double T,
                                         std::span<const double> strikes, McSpec spec = {});
McEstimate mc_quanto_price(const MarketSetup& setup, const VolSurface& equity, const VolSurface& fx,
                           double T, double K, McSpec spec = {});

// One-factor Monte Carlo with the projected quanto drift rho sigma_S sigma_XS
// (one drift slice per time step). Reprices European quantos if the
// projection preserves the terminal law.
std::vector<McEstimate> mc_local_drift_quanto_prices(const MarketSetup& setup,
                                                     const VolSurface& equity,
                                                     const VolSurface& fx, double T,
                                                     std::span<const double> strikes, int N_t,
                                                     McSpec spec = {});

}  // namespace qcoll
