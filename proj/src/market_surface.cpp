#include "qcoll/market_surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qcoll/errors.hpp"
#include "qcoll/normal.hpp"

namespace qcoll {

namespace {

constexpr int kArbitrageGridPoints = 200;
constexpr double kMinMassInBounds = 0.999;
constexpr double kMinTime = 1e-10;
constexpr int kMaxQuantileIterations = 100;

bool finite(double x) { return std::isfinite(x); }

std::string fmt_point(double K, double t) {
  std::ostringstream os;
  os << "(K=" << K << ", t=" << t << ")";
  return os.str();
}

// Butterfly term of the Dupire denominator in total-variance form; the
// density is phi(d2) * g / (K sqrt(w)).
double durrleman(double k, const VarianceSlice& v) {
  const double a = 1.0 - 0.5 * k * v.w_k / v.w;
  return a * a - 0.25 * v.w_k * v.w_k * (1.0 / v.w + 0.25) + 0.5 * v.w_kk;
}

struct SmileValue {
  double s;
  double s_k;
  double s_kk;
};

struct PillarSmile {
  double T;
  double a;
  double b;
  double c;
  double k_lo;
  double k_hi;

  // The quadratic itself; clamping to the bounds is done by the surface.
  SmileValue eval(double k) const { return {a + (b + c * k) * k, b + 2.0 * c * k, 2.0 * c}; }

  // Total variance t * sigma(k)^2 and partials, with w_t = sigma^2.
  VarianceSlice variance_at(double k, double t) const {
    const SmileValue v = eval(k);
    return {t * v.s * v.s, 2.0 * t * v.s * v.s_k, 2.0 * t * (v.s_k * v.s_k + v.s * v.s_kk),
            v.s * v.s};
  }
};

struct KBounds {
  double lo;
  double hi;
  double dlo_dt;
  double dhi_dt;
};

}  // namespace

// Total variance is interpolated linearly in T at fixed k between pillars and
// held at the pillar smile outside [T_1, T_n]. Each maturity has one k-range
// (the pillar bounds, interpolated linearly in T and frozen outside the pillar
// span); w is smooth inside it and flat in k outside, so the only kink in the
// smile sits exactly on the strike bounds.
struct VolSurface::Data {
  Asset asset;
  double spot;
  double drift;
  std::vector<SmilePillar> pillars;
  std::vector<PillarSmile> smiles;

  double forward(double T) const { return spot * std::exp(drift * T); }

  std::size_t right_index(double t) const {
    return static_cast<std::size_t>(
        std::upper_bound(smiles.begin(), smiles.end(), t,
                         [](double x, const PillarSmile& p) { return x < p.T; }) -
        smiles.begin());
  }

  KBounds k_bounds(double T) const {
    if (T <= smiles.front().T) return {smiles.front().k_lo, smiles.front().k_hi, 0.0, 0.0};
    if (T >= smiles.back().T) return {smiles.back().k_lo, smiles.back().k_hi, 0.0, 0.0};
    const std::size_t i = right_index(T);
    const PillarSmile& l = smiles[i - 1];
    const PillarSmile& r = smiles[i];
    const double dt = r.T - l.T;
    const double lam = (T - l.T) / dt;
    return {(1.0 - lam) * l.k_lo + lam * r.k_lo, (1.0 - lam) * l.k_hi + lam * r.k_hi,
            (r.k_lo - l.k_lo) / dt, (r.k_hi - l.k_hi) / dt};
  }

  // Unclamped interpolation of the pillar quadratics.
  VarianceSlice smooth_variance(double k, double t) const {
    if (t <= smiles.front().T) return smiles.front().variance_at(k, t);
    if (t >= smiles.back().T) return smiles.back().variance_at(k, t);
    const std::size_t i = right_index(t);
    const PillarSmile& l = smiles[i - 1];
    const PillarSmile& r = smiles[i];
    const VarianceSlice wl = l.variance_at(k, l.T);
    const VarianceSlice wr = r.variance_at(k, r.T);
    const double dt = r.T - l.T;
    const double lam = (t - l.T) / dt;
    return {(1.0 - lam) * wl.w + lam * wr.w, (1.0 - lam) * wl.w_k + lam * wr.w_k,
            (1.0 - lam) * wl.w_kk + lam * wr.w_kk, (wr.w - wl.w) / dt};
  }

  // At k exactly on a bound the inside (one-sided) derivatives are returned.
  VarianceSlice variance(double k, double T) const {
    const double t = std::max(T, kMinTime);
    const KBounds kb = k_bounds(t);
    if (k < kb.lo || k > kb.hi) {
      const bool low = k < kb.lo;
      VarianceSlice v = smooth_variance(low ? kb.lo : kb.hi, t);
      // w(k, t) = W(k_b(t), t): the moving edge contributes to w_t.
      v.w_t += v.w_k * (low ? kb.dlo_dt : kb.dhi_dt);
      v.w_k = 0.0;
      v.w_kk = 0.0;
      return v;
    }
    return smooth_variance(k, t);
  }

  StrikeBounds bounds(double T) const {
    const KBounds kb = k_bounds(T);
    const double f = forward(T);
    return {f * std::exp(kb.lo), f * std::exp(kb.hi)};
  }
};

std::string_view to_string(Asset asset) { return asset == Asset::Equity ? "EQ" : "FX"; }

void MarketSetup::validate() const {
  if (!(spot_S > 0.0) || !finite(spot_S)) throw InputError("spot_S must be positive and finite");
  if (!(spot_X > 0.0) || !finite(spot_X)) throw InputError("spot_X must be positive and finite");
  if (!finite(r_F) || !finite(r_D) || !finite(div_yield)) throw InputError("rates must be finite");
  if (!(std::abs(rho) <= 1.0)) throw InputError("rho must lie in [-1, 1]");
}

double MarketSetup::domestic_discount(double T) const { return std::exp(-r_D * T); }
double MarketSetup::foreign_discount(double T) const { return std::exp(-r_F * T); }

double MarketSetup::drift(Asset asset) const {
  return asset == Asset::Equity ? r_F - div_yield : r_F - r_D;
}

double MarketSetup::spot(Asset asset) const { return asset == Asset::Equity ? spot_S : spot_X; }

MarketSetup MarketSetup::with_rho(double new_rho) const {
  MarketSetup out = *this;
  out.rho = new_rho;
  out.validate();
  return out;
}

double forward(const MarketSetup& setup, Asset asset, double T) {
  if (!(T >= 0.0)) throw DomainError("forward: maturity must be non-negative");
  return setup.spot(asset) * std::exp(setup.drift(asset) * T);
}

namespace {

double min_on(const PillarSmile& s, double lo, double hi) {
  double m = std::min(s.eval(lo).s, s.eval(hi).s);
  if (s.c != 0.0) {
    const double vertex = -s.b / (2.0 * s.c);
    if (vertex > lo && vertex < hi) m = std::min(m, s.eval(vertex).s);
  }
  return m;
}

}  // namespace

VolSurface::VolSurface(const MarketSetup& setup, Asset asset, std::vector<SmilePillar> pillars) {
  setup.validate();
  if (pillars.empty()) throw InputError("vol surface needs at least one pillar");
  std::sort(pillars.begin(), pillars.end(),
            [](const SmilePillar& x, const SmilePillar& y) { return x.maturity < y.maturity; });

  auto data = std::make_shared<Data>();
  data->asset = asset;
  data->spot = setup.spot(asset);
  data->drift = setup.drift(asset);
  const std::string name(to_string(asset));
  auto tag = [&](double T) { return name + " pillar T=" + std::to_string(T); };

  for (std::size_t i = 0; i < pillars.size(); ++i) {
    const SmilePillar& p = pillars[i];
    if (!(p.maturity > 0.0) || !finite(p.maturity))
      throw InputError(tag(p.maturity) + ": maturity must be positive");
    if (i > 0 && !(p.maturity > pillars[i - 1].maturity))
      throw InputError(tag(p.maturity) + ": duplicate maturity");
    if (!finite(p.params.atm_vol) || !finite(p.params.skew) || !finite(p.params.curvature))
      throw InputError(tag(p.maturity) + ": non-finite smile parameters");
    const double f = data->forward(p.maturity);
    if (!(p.strike_lo > 0.0) || !(p.strike_lo < f) || !(p.strike_hi > f) || !finite(p.strike_hi))
      throw InputError(tag(p.maturity) + ": strike bounds must bracket the forward");
    data->smiles.push_back({p.maturity, p.params.atm_vol, p.params.skew, p.params.curvature,
                            std::log(p.strike_lo / f), std::log(p.strike_hi / f)});
  }

  // Between pillars each quadratic is evaluated up to the interpolated bounds,
  // so it must stay positive on the envelope of its neighbours' ranges too.
  const std::size_t n = data->smiles.size();
  for (std::size_t i = 0; i < n; ++i) {
    const PillarSmile& s = data->smiles[i];
    double lo = s.k_lo;
    double hi = s.k_hi;
    for (std::size_t j : {i - 1, i + 1}) {
      if (j >= n) continue;
      lo = std::min(lo, data->smiles[j].k_lo);
      hi = std::max(hi, data->smiles[j].k_hi);
    }
    if (!(min_on(s, lo, hi) > 0.0))
      throw InputError(tag(s.T) + ": implied vol is not positive on the strike bounds");
  }

  auto check_density = [&](double T) {
    const KBounds kb = data->k_bounds(T);
    for (int j = 0; j < kArbitrageGridPoints; ++j) {
      const double k = kb.lo + (kb.hi - kb.lo) * j / (kArbitrageGridPoints - 1);
      if (!(durrleman(k, data->variance(k, T)) > 0.0)) {
        const double K = data->forward(T) * std::exp(k);
        throw ArbitrageError(name + " surface: negative density (butterfly arbitrage) at " +
                                 fmt_point(K, T),
                             K, T);
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    check_density(data->smiles[i].T);
    if (i == 0) continue;
    const PillarSmile& l = data->smiles[i - 1];
    const PillarSmile& r = data->smiles[i];
    for (double lam : {0.25, 0.5, 0.75}) check_density(l.T + lam * (r.T - l.T));
    const double lo = std::min(l.k_lo, r.k_lo);
    const double hi = std::max(l.k_hi, r.k_hi);
    for (int j = 0; j < kArbitrageGridPoints; ++j) {
      const double k = lo + (hi - lo) * j / (kArbitrageGridPoints - 1);
      if (!(r.variance_at(k, r.T).w > l.variance_at(k, l.T).w) ||
          !(data->variance(k, r.T).w > data->variance(k, l.T).w)) {
        const double K = data->forward(r.T) * std::exp(k);
        throw ArbitrageError(tag(r.T) + ": total variance decreases in T (calendar arbitrage) at " +
                                 fmt_point(K, r.T),
                             K, r.T);
      }
    }
  }
  data->pillars = std::move(pillars);
  data_ = std::move(data);

  for (const SmilePillar& p : data_->pillars) {
    const MarginalDistribution m = marginal(p.maturity);
    const double mass = m.cdf(m.bounds().hi) - m.cdf(m.bounds().lo);
    if (mass < kMinMassInBounds) {
      throw InputError(tag(p.maturity) + ": strike bounds hold only " + std::to_string(mass) +
                       " of the probability mass; widen [K_lo, K_hi]");
    }
  }
}

Asset VolSurface::asset() const { return data_->asset; }
double VolSurface::spot() const { return data_->spot; }
double VolSurface::drift() const { return data_->drift; }
double VolSurface::forward(double T) const { return data_->forward(T); }
const std::vector<SmilePillar>& VolSurface::pillars() const { return data_->pillars; }

StrikeBounds VolSurface::bounds(double T) const {
  if (!(T > 0.0) || !finite(T)) throw DomainError("bounds: maturity must be positive");
  return data_->bounds(T);
}

VarianceSlice VolSurface::variance(double k, double T) const { return data_->variance(k, T); }

double VolSurface::implied_vol(double K, double T) const {
  if (!(K > 0.0) || !finite(K)) throw DomainError("implied_vol: strike outside evaluable range");
  if (!(T > 0.0) || !finite(T)) throw DomainError("implied_vol: maturity must be positive");
  return std::sqrt(data_->variance(std::log(K / forward(T)), T).w / T);
}

double VolSurface::call_price(double K, double T) const {
  if (!(K > 0.0) || !finite(K)) throw DomainError("call_price: strike outside evaluable range");
  if (!(T > 0.0) || !finite(T)) throw DomainError("call_price: maturity must be positive");
  const double f = forward(T);
  return black_call(f, K, std::sqrt(data_->variance(std::log(K / f), T).w));
}

double VolSurface::local_vol(double K, double t) const {
  if (!(K > 0.0) || !finite(K)) throw DomainError("local_vol: strike outside evaluable range");
  if (!(t >= 0.0) || !finite(t)) throw DomainError("local_vol: time must be non-negative");
  const double te = std::max(t, kMinTime);
  const double k = std::log(K / forward(te));
  const VarianceSlice v = data_->variance(k, te);
  const double denom = durrleman(k, v);
  if (!(denom > 0.0))
    throw ArbitrageError("local_vol: non-positive Dupire denominator at " + fmt_point(K, t), K, t);
  if (!(v.w_t > 0.0))
    throw ArbitrageError("local_vol: non-positive calendar slope at " + fmt_point(K, t), K, t);
  return std::sqrt(v.w_t / denom);
}

MarginalDistribution VolSurface::marginal(double T) const {
  if (!(T > 0.0) || !finite(T)) throw DomainError("marginal: maturity must be positive");
  return MarginalDistribution(data_, T);
}

MarginalDistribution::MarginalDistribution(std::shared_ptr<const VolSurface::Data> data, double T)
    : data_(std::move(data)), T_(T), forward_(data_->forward(T)), bounds_(data_->bounds(T)) {
  const KBounds kb = data_->k_bounds(T);
  k_lo_ = kb.lo;
  k_hi_ = kb.hi;
}

Asset MarginalDistribution::asset() const { return data_->asset; }

VarianceSlice MarginalDistribution::variance(double k) const { return data_->variance(k, T_); }

// CDF from calls: N(-d2) + phi(d2) * dsqrt(w)/dk.
double MarginalDistribution::raw_cdf(double k) const {
  const VarianceSlice v = variance(k);
  const double theta = std::sqrt(v.w);
  const double d2 = -k / theta - 0.5 * theta;
  return norm_cdf(-d2) + norm_pdf(d2) * 0.5 * v.w_k / theta;
}

double MarginalDistribution::raw_survival(double k) const {
  const VarianceSlice v = variance(k);
  const double theta = std::sqrt(v.w);
  const double d2 = -k / theta - 0.5 * theta;
  return norm_cdf(d2) - norm_pdf(d2) * 0.5 * v.w_k / theta;
}

// dF/dk.
double MarginalDistribution::density_k(double k) const {
  const VarianceSlice v = variance(k);
  const double theta = std::sqrt(v.w);
  const double d2 = -k / theta - 0.5 * theta;
  return norm_pdf(d2) * durrleman(k, v) / theta;
}

// Outside the bounds the flat-vol CDF is clamped against its value at the
// edge (inside limit), which keeps it continuous there and monotone overall.
double MarginalDistribution::cdf(double K) const {
  if (!(K > 0.0)) return 0.0;
  if (std::isinf(K)) return 1.0;
  const double k = std::log(K / forward_);
  double p = raw_cdf(k);
  if (k < k_lo_) p = std::min(p, raw_cdf(k_lo_));
  if (k > k_hi_) p = std::max(p, raw_cdf(k_hi_));
  return std::clamp(p, 0.0, 1.0);
}

double MarginalDistribution::survival(double K) const {
  if (!(K > 0.0)) return 1.0;
  if (std::isinf(K)) return 0.0;
  const double k = std::log(K / forward_);
  double p = raw_survival(k);
  if (k < k_lo_) p = std::max(p, raw_survival(k_lo_));
  if (k > k_hi_) p = std::min(p, raw_survival(k_hi_));
  return std::clamp(p, 0.0, 1.0);
}

double MarginalDistribution::density(double K) const {
  if (!(K > 0.0) || !finite(K)) return 0.0;
  const double k = std::log(K / forward_);
  return density_k(k) / K;
}

double MarginalDistribution::call_price(double K) const {
  if (!(K > 0.0) || !finite(K)) throw DomainError("call_price: strike outside evaluable range");
  return black_call(forward_, K, std::sqrt(variance(std::log(K / forward_)).w));
}

double MarginalDistribution::implied_vol(double K) const {
  if (!(K > 0.0) || !finite(K)) throw DomainError("implied_vol: strike outside evaluable range");
  return std::sqrt(variance(std::log(K / forward_)).w / T_);
}

QuantileResult MarginalDistribution::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile: probability must lie in (0, 1)");
  return q <= 0.5 ? solve(q, false) : solve(1.0 - q, true);
}

QuantileResult MarginalDistribution::quantile_of_normal(double z) const {
  if (!finite(z)) throw DomainError("quantile_of_normal: z must be finite");
  return z <= 0.0 ? solve(norm_cdf(z), false) : solve(norm_cdf(-z), true);
}

double MarginalDistribution::to_normal(double K) const {
  const double p = cdf(K);
  if (p <= 0.5) return norm_inv(p);
  return norm_inv_upper(survival(K));
}

// Root of cdf = p (or survival = p when `upper`) in forward log-moneyness,
// bracketed by the strike bounds. Newton steps on the analytic density,
// falling back to bisection whenever a step leaves the bracket.
QuantileResult MarginalDistribution::solve(double p, bool upper) const {
  // Increasing in k in both modes.
  auto residual = [&](double k) { return upper ? p - raw_survival(k) : raw_cdf(k) - p; };
  const double tol = std::max(1e-14 * p, std::numeric_limits<double>::min());

  double lo = k_lo_;
  double hi = k_hi_;
  if (residual(lo) >= 0.0) return {bounds_.lo, true};
  if (residual(hi) <= 0.0) return {bounds_.hi, true};

  const double theta0 = std::sqrt(variance(0.0).w);
  const double z_guess = upper ? norm_inv_upper(p) : norm_inv(p);
  double x = -0.5 * theta0 * theta0 + theta0 * z_guess;
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

  for (int it = 0; it < kMaxQuantileIterations; ++it) {
    const double f = residual(x);
    if (std::abs(f) <= tol) break;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double slope = density_k(x);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return {forward_ * std::exp(x), false};
}

}  // namespace qcoll
