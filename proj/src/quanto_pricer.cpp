#include "qcoll/quanto_pricer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "qcoll/errors.hpp"
#include "qcoll/normal.hpp"

namespace qcoll {

namespace {

constexpr double kRhoLimit = 0.999;
constexpr int kRhoScanPoints = 9;
constexpr int kMaxRootIterations = 200;
constexpr double kMaxKappa = 12.0;
constexpr int kMaxMoments = 31;

void check_consistent(const MarketSetup& setup, const VolSurface& surface, Asset asset) {
  if (surface.asset() != asset)
    throw InputError(std::string("expected an ") + std::string(to_string(asset)) + " surface");
  const double tol = 1e-12;
  if (std::abs(surface.spot() - setup.spot(asset)) > tol * setup.spot(asset) ||
      std::abs(surface.drift() - setup.drift(asset)) > tol)
    throw InputError(std::string(to_string(asset)) + " surface was built from a different market setup");
}

}  // namespace

double QuantoContext::fx_min_slope() const { return min_derivative(a1_); }
double QuantoContext::equity_min_slope() const { return min_derivative(a2_); }

QuantoContext QuantoContext::with_correlation(double rho) const {
  if (!(std::abs(rho) <= 1.0)) throw DomainError("correlation must lie in [-1, 1]");
  QuantoContext out = *this;
  out.rho_ = rho;
  out.b_ = condition_coeffs(a1_, rho);
  out.c_ = convolve(a2_, out.b_);
  return out;
}

QuantoContext build_context(const MarketSetup& setup, const VolSurface& equity,
                            const VolSurface& fx, double T, CollocationOrders orders) {
  setup.validate();
  check_consistent(setup, equity, Asset::Equity);
  check_consistent(setup, fx, Asset::Fx);
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("build_context: maturity must be positive");

  QuantoContext ctx(fx.marginal(T), equity.marginal(T));
  ctx.T_ = T;
  ctx.spot_X_ = setup.spot_X;
  ctx.fx_forward_ = forward(setup, Asset::Fx, T);
  ctx.equity_forward_ = forward(setup, Asset::Equity, T);
  ctx.domestic_discount_ = setup.domestic_discount(T);
  ctx.foreign_discount_ = setup.foreign_discount(T);

  auto fit = [](const MarginalDistribution& m, int order, double fwd, double& shift) {
    std::vector<double> a = fit_marginal(m, hermite_nodes(order)).vector();
    shift = fwd - PolyCoeffs(a).normal_mean();
    a[0] += shift;
    return PolyCoeffs(std::move(a));
  };
  ctx.a1_ = fit(ctx.fx_, orders.fx, ctx.fx_forward_, ctx.fx_shift_);
  ctx.a2_ = fit(ctx.equity_, orders.equity, ctx.equity_forward_, ctx.equity_shift_);
  return ctx.with_correlation(setup.rho);
}

TruncatedMoments truncated_moments(double kappa, int N) {
  if (!std::isfinite(kappa) || std::abs(kappa) > kMaxKappa)
    throw DomainError("truncated_moments: |kappa| > 12 underflows the survival probability");
  if (N < 1 || N > kMaxMoments) throw DomainError("truncated_moments: N must lie in [1, 31]");
  TruncatedMoments tm;
  tm.kappa = kappa;
  tm.survival = norm_cdf(-kappa);
  tm.hazard = norm_pdf(kappa) / tm.survival;
  tm.m.resize(static_cast<std::size_t>(N));
  tm.m[0] = 1.0;
  double kpow = 1.0;  // kappa^(i-1)
  for (int i = 1; i < N; ++i) {
    const double prev2 = i >= 2 ? tm.m[static_cast<std::size_t>(i - 2)] : 0.0;
    tm.m[static_cast<std::size_t>(i)] = (i - 1) * prev2 + kpow * tm.hazard;
    kpow *= kappa;
  }
  return tm;
}

std::vector<double> spread_coeffs(const QuantoContext& ctx, double K) {
  const PolyCoeffs& b = ctx.b();
  const PolyCoeffs& a2 = ctx.a2();
  std::vector<double> e = ctx.c().vector();
  const double x0 = ctx.spot_X();
  for (std::size_t n = 0; n < b.size(); ++n) e[n] -= K * b[n];
  for (std::size_t n = 0; n < a2.size(); ++n) e[n] -= x0 * a2[n];
  e[0] += x0 * K;
  return e;
}

SpreadValue quanto_vanilla_spread(const QuantoContext& ctx, double K) {
  if (!(K > 0.0) || !std::isfinite(K)) throw DomainError("quanto_vanilla_spread: strike must be positive");
  SpreadValue out;
  const MarginalDistribution& eq = ctx.equity_marginal();
  const double p = eq.cdf(K);
  double kappa;
  if (p <= 0.5) {
    kappa = norm_inv(p);
  } else {
    const double surv = eq.survival(K);
    if (!(surv > 0.0)) {
      out.kappa = std::numeric_limits<double>::infinity();
      out.kappa_clamped = true;
      out.deep_otm = true;
      return out;
    }
    kappa = norm_inv_upper(surv);
  }
  out.kappa = kappa;
  if (kappa > kKappaClamp) {
    out.kappa_clamped = true;
    out.deep_otm = true;
    return out;
  }
  if (kappa < -kKappaClamp) {
    kappa = -kKappaClamp;
    out.kappa_clamped = true;
  }
  const std::vector<double> e = spread_coeffs(ctx, K);
  const TruncatedMoments tm = truncated_moments(kappa, static_cast<int>(e.size()));
  double acc = 0.0;
  for (std::size_t n = 0; n < e.size(); ++n) acc += e[n] * tm.m[n];
  out.value = acc * tm.survival;
  return out;
}

QuantoQuote price_quanto(const QuantoContext& ctx, double K) {
  QuantoQuote q;
  q.strike = K;
  q.spread = quanto_vanilla_spread(ctx, K);
  const double vanilla = ctx.equity_marginal().call_price(K);
  q.vanilla_call = ctx.foreign_discount() * vanilla;
  q.quanto_call =
      std::max(0.0, ctx.foreign_discount() * (q.spread.value / ctx.spot_X() + vanilla));
  return q;
}

std::vector<QuantoQuote> price_strikes(const QuantoContext& ctx, std::span<const double> strikes) {
  std::vector<QuantoQuote> out;
  out.reserve(strikes.size());
  for (double K : strikes) out.push_back(price_quanto(ctx, K));
  return out;
}

double quanto_call(const QuantoContext& ctx, double K) { return price_quanto(ctx, K).quanto_call; }

double quanto_forward(const QuantoContext& ctx) { return ctx.c().normal_mean() / ctx.fx_forward(); }

CorrelationFit implied_correlation(const MarketSetup& setup, const VolSurface& equity,
                                   const VolSurface& fx, double T, double target,
                                   CollocationOrders orders) {
  return implied_correlation(build_context(setup, equity, fx, T, orders), target);
}

CorrelationFit implied_correlation(const QuantoContext& ctx, double target) {
  if (!(target > 0.0) || !std::isfinite(target))
    throw CalibrationError("implied_correlation: target forward must be positive");
  auto fwd = [&](double rho) { return quanto_forward(ctx.with_correlation(rho)); };

  std::array<double, kRhoScanPoints> rhos{};
  std::array<double, kRhoScanPoints> vals{};
  for (int j = 0; j < kRhoScanPoints; ++j) {
    rhos[j] = -kRhoLimit + 2.0 * kRhoLimit * j / (kRhoScanPoints - 1);
    vals[j] = fwd(rhos[j]);
  }
  const double dir = vals.back() > vals.front() ? 1.0 : -1.0;
  for (int j = 1; j < kRhoScanPoints; ++j) {
    if (!(dir * (vals[j] - vals[j - 1]) > 0.0))
      throw CalibrationError(
          "implied_correlation: quanto forward is not monotone in correlation on [-0.999, 0.999]");
  }
  const double lo_val = std::min(vals.front(), vals.back());
  const double hi_val = std::max(vals.front(), vals.back());
  if (target < lo_val || target > hi_val) {
    std::ostringstream os;
    os.precision(12);
    os << "implied_correlation: target forward " << target << " outside attainable interval ["
       << lo_val << ", " << hi_val << "]";
    throw UnattainableForwardError(os.str(), lo_val, hi_val);
  }

  int j = 0;
  while (j < kRhoScanPoints - 2 && dir * (vals[j + 1] - target) < 0.0) ++j;
  double a = rhos[j];
  double b = rhos[j + 1];
  double fa = vals[j] - target;
  double fb = vals[j + 1] - target;
  const double ftol = 1e-12 * target;

  CorrelationFit fit;
  if (std::abs(fa) <= ftol) return {a, fa, 0};
  if (std::abs(fb) <= ftol) return {b, fb, 0};
  // Illinois-modified regula falsi: secant steps kept inside the bracket.
  int side = 0;
  double x = a;
  double fx = fa;
  for (int it = 1; it <= kMaxRootIterations; ++it) {
    x = (a * fb - b * fa) / (fb - fa);
    if (!(x > std::min(a, b) && x < std::max(a, b))) x = 0.5 * (a + b);
    fx = fwd(x) - target;
    fit = {x, fx, it};
    if (std::abs(fx) <= ftol || std::abs(b - a) < 1e-15) break;
    if ((fx > 0.0) == (fb > 0.0)) {
      b = x;
      fb = fx;
      if (side == -1) fa *= 0.5;
      side = -1;
    } else {
      a = x;
      fa = fx;
      if (side == 1) fb *= 0.5;
      side = 1;
    }
  }
  return fit;
}

double implied_vol_of(double price, double forward, double K, double T) {
  if (!(forward > 0.0) || !(K > 0.0) || !(T > 0.0))
    throw DomainError("implied_vol_of: forward, strike and maturity must be positive");
  const double intrinsic = std::max(forward - K, 0.0);
  const double slack = 1e-14 * forward;
  if (!(price >= intrinsic - slack) || !(price <= forward + slack)) {
    std::ostringstream os;
    os.precision(15);
    os << "implied_vol_of: price " << price << " outside Black bounds [" << intrinsic << ", "
       << forward << "]";
    throw BoundViolationError(os.str());
  }
  if (price <= intrinsic) return 0.0;
  if (price >= forward) throw BoundViolationError("implied_vol_of: price at the forward has no finite vol");

  // Work in total stdev theta = sigma sqrt(T); the call is increasing in theta.
  double lo = 0.0;
  double hi = 1.0;
  while (black_call(forward, K, hi) < price) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw BoundViolationError("implied_vol_of: no finite vol reproduces the price");
  }
  double theta = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxRootIterations; ++it) {
    const double diff = black_call(forward, K, theta) - price;
    if (std::abs(diff) <= 1e-15 * forward) break;
    if (diff < 0.0) {
      lo = theta;
    } else {
      hi = theta;
    }
    const double d1 = std::log(forward / K) / theta + 0.5 * theta;
    const double vega = forward * norm_pdf(d1);
    double next = vega > 0.0 ? theta - diff / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - theta) <= 1e-16 * theta) {
      theta = next;
      break;
    }
    theta = next;
  }
  return theta / std::sqrt(T);
}

double adhoc_quanto_forward(const MarketSetup& setup, const VolSurface& equity,
                            const VolSurface& fx, double T) {
  const double fs = forward(setup, Asset::Equity, T);
  const double fxf = forward(setup, Asset::Fx, T);
  const double vol_s = equity.implied_vol(fs, T);
  const double vol_x = fx.implied_vol(fxf, T);
  return fs * std::exp(setup.rho * vol_s * vol_x * T);
}

double adhoc_quanto_price(const MarketSetup& setup, const VolSurface& equity, const VolSurface& fx,
                          double T, double K) {
  check_consistent(setup, equity, Asset::Equity);
  check_consistent(setup, fx, Asset::Fx);
  const double fq = adhoc_quanto_forward(setup, equity, fx, T);
  const double vol = equity.implied_vol(K, T);
  return setup.domestic_discount(T) * black_call(fq, K, vol * std::sqrt(T));
}

}  // namespace qcoll
