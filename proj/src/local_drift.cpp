#include "qcoll/local_drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qcoll/errors.hpp"

namespace qcoll {

namespace {
constexpr int kMaxDriftOrder = 10;
}

std::vector<double> nu_values(const VolSurface& fx, const MarketSetup& setup, double t,
                              const CollocationBasis& basis) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("nu_values: time must be positive");
  const MarginalDistribution m = fx.marginal(t);
  const double ratio = setup.foreign_discount(t) / setup.domestic_discount(t);
  std::vector<double> nu;
  nu.reserve(static_cast<std::size_t>(basis.order()));
  for (double x : basis.nodes()) {
    const QuantileResult q = m.quantile_of_normal(x);
    if (q.saturated) {
      std::ostringstream os;
      os << "nu_values: FX node z=" << x << " at t=" << t << " maps outside the strike bounds";
      throw TailCoverageError(os.str());
    }
    nu.push_back(q.strike / setup.spot_X * fx.local_vol(q.strike, t) * ratio);
  }
  return nu;
}

DriftSlice fit_drift_slice(const VolSurface& fx, const VolSurface& equity, const MarketSetup& setup,
                           double t, int N_t) {
  if (N_t < 2 || N_t > kMaxDriftOrder) throw DomainError("fit_drift_slice: N_t must lie in [2, 10]");
  setup.validate();
  const CollocationBasis basis = hermite_nodes(N_t);
  DriftSlice slice(equity.marginal(t));
  slice.t_ = t;
  slice.rho_ = setup.rho;
  slice.measure_ratio_ = setup.foreign_discount(t) / setup.domestic_discount(t);
  const std::vector<double> nu = nu_values(fx, setup, t, basis);
  // nu_i = weight_i * sigma_X at the node; the weights are recovered exactly
  // from the same quantiles rather than re-solved.
  const MarginalDistribution fxm = fx.marginal(t);
  std::vector<double> weight;
  for (double x : basis.nodes()) weight.push_back(fxm.quantile_of_normal(x).strike / fxm.forward());
  slice.a_ = solve_vandermonde(basis, nu);
  slice.b_ = condition_coeffs(slice.a_, setup.rho);
  slice.weight_a_ = solve_vandermonde(basis, weight);
  slice.weight_b_ = condition_coeffs(slice.weight_a_, setup.rho);

  constexpr int kScan = 401;
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double z = -4.0 + 8.0 * i / (kScan - 1);
    const double den = slice.weight_b_.eval(z);
    m = std::min(m, den > 0.0 ? slice.b_.eval(z) / den : -std::numeric_limits<double>::infinity());
  }
  slice.min_value_ = m;
  return slice;
}

ConditionalVol conditional_fx_vol_checked(const DriftSlice& slice, double S) {
  const MarginalDistribution& eq = slice.equity_marginal();
  const StrikeBounds bounds = eq.bounds();
  if (!(S >= bounds.lo && S <= bounds.hi)) {
    std::ostringstream os;
    os << "conditional_fx_vol: S=" << S << " outside the equity domain [" << bounds.lo << ", "
       << bounds.hi << "] at t=" << slice.time();
    throw DomainError(os.str());
  }
  const double z = eq.to_normal(S);
  const double den = slice.weight_b().eval(z);
  const double v = den > 0.0 ? slice.b().eval(z) / den : 0.0;
  if (!(v >= kConditionalVolFloor)) return {kConditionalVolFloor, true};
  return {v, false};
}

double conditional_fx_vol(const DriftSlice& slice, double S) {
  return conditional_fx_vol_checked(slice, S).value;
}

double quanto_local_drift(const DriftSlice& slice, const VolSurface& equity, double S, double t) {
  return slice.rho() * equity.local_vol(S, t) * conditional_fx_vol(slice, S);
}

}  // namespace qcoll
