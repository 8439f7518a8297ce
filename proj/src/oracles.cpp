#include "qcoll/oracles.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "qcoll/errors.hpp"
#include "qcoll/local_drift.hpp"
#include "qcoll/normal.hpp"

namespace qcoll {

namespace {

struct GaussLegendre {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

GaussLegendre gauss_legendre(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  GaussLegendre gl;
  for (int i = 0; i < n; ++i) {
    gl.x.push_back(solver.eigenvalues()(i));
    const double v = solver.eigenvectors()(0, i);
    gl.w.push_back(2.0 * v * v);
  }
  return gl;
}

const GaussLegendre& gl16() {
  static const GaussLegendre rule = gauss_legendre(16);
  return rule;
}

const GaussLegendre& gl8() {
  static const GaussLegendre rule = gauss_legendre(8);
  return rule;
}

constexpr std::uint64_t kChunkPaths = 4096;

struct ChunkSums {
  std::vector<double> sum;
  std::vector<double> sumsq;
};

// Runs `simulate(rng, n_paths, terminal_spots)` over fixed-size chunks, each
// with its own seeded generator, so results do not depend on the worker count.
template <class Simulate>
std::vector<McEstimate> run_chunks(const McSpec& spec, double discount,
                                   std::span<const double> strikes, const Simulate& simulate) {
  if (spec.paths < 1024) throw DomainError("Monte Carlo needs at least 2^10 paths");
  if (spec.steps_per_year < 1) throw DomainError("Monte Carlo needs at least one step per year");
  const std::uint64_t n_chunks = (spec.paths + kChunkPaths - 1) / kChunkPaths;
  std::vector<ChunkSums> sums(n_chunks);
  unsigned workers = spec.workers != 0 ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, n_chunks));

  auto work = [&](unsigned worker, std::exception_ptr& err) {
    try {
      std::vector<double> spots;
      for (std::uint64_t c = worker; c < n_chunks; c += workers) {
        const std::uint64_t n = std::min(kChunkPaths, spec.paths - c * kChunkPaths);
        std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                          static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
        std::mt19937_64 rng(seq);
        spots.assign(n, 0.0);
        simulate(rng, spots);
        ChunkSums& s = sums[c];
        s.sum.assign(strikes.size(), 0.0);
        s.sumsq.assign(strikes.size(), 0.0);
        for (double st : spots) {
          for (std::size_t k = 0; k < strikes.size(); ++k) {
            const double pay = discount * std::max(st - strikes[k], 0.0);
            s.sum[k] += pay;
            s.sumsq[k] += pay * pay;
          }
        }
      }
    } catch (...) {
      err = std::current_exception();
    }
  };

  std::vector<std::exception_ptr> errors(workers);
  if (workers == 1) {
    work(0, errors[0]);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w, std::ref(errors[w]));
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<McEstimate> out(strikes.size());
  const double n = static_cast<double>(spec.paths);
  for (std::size_t k = 0; k < strikes.size(); ++k) {
    double sum = 0.0;
    double sumsq = 0.0;
    for (const ChunkSums& s : sums) {
      sum += s.sum[k];
      sumsq += s.sumsq[k];
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq / n - mean * mean) * n / (n - 1.0));
    out[k] = {mean, std::sqrt(var / n), spec.paths};
  }
  return out;
}

int step_count(double T, int steps_per_year) {
  return std::max(1, static_cast<int>(std::ceil(T * steps_per_year - 1e-9)));
}

}  // namespace

CopulaOracle::CopulaOracle(const MarketSetup& setup, const VolSurface& equity, const VolSurface& fx,
                           double T, QuadratureSpec spec)
    : setup_(setup),
      T_(T),
      spec_(spec),
      fx_(fx.marginal(T)),
      equity_(equity.marginal(T)),
      fx_surface_(fx) {
  setup.validate();
  if (spec.nodes < 16 || !(spec.z_max > 0.0)) throw DomainError("QuadratureSpec: need >= 16 nodes and z_max > 0");
  const int n = spec.nodes;
  h_ = 2.0 * spec.z_max / (n - 1);
  const double fx_fwd = forward(setup, Asset::Fx, T);
  for (int j = 0; j < n; ++j) {
    const double z = -spec.z_max + h_ * j;
    z_.push_back(z);
    g1_.push_back(fx_.quantile_of_normal(z).strike);
    g2_.push_back(equity_.quantile_of_normal(z).strike);
    nu_.push_back(g1_.back() / fx_fwd * fx.local_vol(g1_.back(), T));
  }
  tail_mass_ = fx_.cdf(fx_.bounds().lo) + fx_.survival(fx_.bounds().hi) +
               equity_.cdf(equity_.bounds().lo) + equity_.survival(equity_.bounds().hi);
  for (int j = 0; j < n; ++j) {
    const double w = h_ * norm_pdf(z_[static_cast<std::size_t>(j)]);
    fx_mean_ += w * g1_[static_cast<std::size_t>(j)];
    equity_mean_ += w * g2_[static_cast<std::size_t>(j)];
    xs_mean_ += w * g2_[static_cast<std::size_t>(j)] * conditional_fx(z_[static_cast<std::size_t>(j)]);
  }
}

double CopulaOracle::fx_quantile(double z) const { return fx_.quantile_of_normal(z).strike; }

double CopulaOracle::nu_exact(double z) const {
  const double x = fx_quantile(z);
  return x / forward(setup_, Asset::Fx, T_) * fx_surface_.local_vol(x, T_);
}

// Conditional law Z1 | Z2 = z is N(rho z, 1 - rho^2); the kernel weights are
// normalized over the grid.
double CopulaOracle::conditional(std::span<const double> table, double z, bool vol_table) const {
  const double rho = setup_.rho;
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  if (s < 1e-6) return vol_table ? nu_exact(rho * z) : fx_quantile(rho * z);
  const double mean = rho * z;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < z_.size(); ++j) {
    const double u = (z_[j] - mean) / s;
    if (std::abs(u) > 12.0) continue;
    const double k = std::exp(-0.5 * u * u);
    num += k * table[j];
    den += k;
  }
  return num / den;
}

double CopulaOracle::conditional_fx(double z) const { return conditional(g1_, z, false); }

double CopulaOracle::conditional_fx_vol_at(double z) const {
  return conditional(nu_, z, true) * forward(setup_, Asset::Fx, T_) / conditional_fx(z);
}

// Integral of the payoff leg times E[X_T | z] phi(z) over the exercise region:
// (g2 - K)+ on [kappa, z_max], or (K - g2)+ on [-z_max, kappa] for `put`.
double CopulaOracle::outer_integral(double kappa, double K, int panels, int points, bool put) const {
  const GaussLegendre& gl = points == 16 ? gl16() : gl8();
  const double a = put ? -spec_.z_max : kappa;
  const double b = put ? kappa : spec_.z_max;
  const double width = (b - a) / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      const double z = mid + 0.5 * width * gl.x[i];
      const double s = equity_.quantile_of_normal(z).strike;
      const double pay = put ? K - s : s - K;
      if (pay <= 0.0) continue;
      acc += 0.5 * width * gl.w[i] * pay * conditional_fx(z) * norm_pdf(z);
    }
  }
  return acc;
}

// Strikes below the median are integrated on the put side and converted by
// parity against the same grid's E[X S] and E[X], so deep in-the-money calls
// keep their (tiny) time value accurately.
OracleValue CopulaOracle::quanto_price(double K) const {
  if (!(K > 0.0) || !std::isfinite(K)) throw DomainError("copula_quanto_price: strike must be positive");
  const double kappa = equity_.to_normal(K);
  OracleValue out;
  out.tail_mass = tail_mass_;
  const double scale = setup_.foreign_discount(T_) / setup_.spot_X;
  const int panels = std::max(1, spec_.nodes / 16);
  if (kappa >= spec_.z_max) return out;
  if (kappa > 0.0) {
    const double fine = outer_integral(kappa, K, panels, 16, false);
    const double coarse = outer_integral(kappa, K, panels, 8, false);
    out.value = scale * fine;
    out.error_estimate = scale * std::abs(fine - coarse);
    return out;
  }
  const double k = std::max(kappa, -spec_.z_max);
  const double fine = kappa <= -spec_.z_max ? 0.0 : outer_integral(k, K, panels, 16, true);
  const double coarse = kappa <= -spec_.z_max ? 0.0 : outer_integral(k, K, panels, 8, true);
  out.value = scale * (xs_mean_ - K * fx_mean_ + fine);
  out.error_estimate = scale * std::abs(fine - coarse);
  return out;
}

double CopulaOracle::conditional_fx_ratio(double S) const {
  return conditional_fx(equity_.to_normal(S)) / setup_.spot_X;
}

double CopulaOracle::conditional_fx_vol(double S) const {
  return conditional_fx_vol_at(equity_.to_normal(S));
}

OracleValue copula_quanto_price(const MarketSetup& setup, const VolSurface& equity,
                                const VolSurface& fx, double T, double K, QuadratureSpec spec) {
  return CopulaOracle(setup, equity, fx, T, spec).quanto_price(K);
}

double exact_conditional_fx(const MarketSetup& setup, const VolSurface& equity,
                            const VolSurface& fx, double T, double S, QuadratureSpec spec) {
  return CopulaOracle(setup, equity, fx, T, spec).conditional_fx_ratio(S);
}

double closed_form_lognormal_quanto(const MarketSetup& setup, double sigma_S, double sigma_X,
                                    double T, double K) {
  const double fq = forward(setup, Asset::Equity, T) * std::exp(setup.rho * sigma_S * sigma_X * T);
  return setup.domestic_discount(T) * black_call(fq, K, sigma_S * std::sqrt(T));
}

std::vector<McEstimate> mc_quanto_prices(const MarketSetup& setup, const VolSurface& equity,
                                         const VolSurface& fx, double T,
                                         std::span<const double> strikes, McSpec spec) {
  setup.validate();
  const int steps = step_count(T, spec.steps_per_year);
  const double dt = T / steps;
  const double sq = std::sqrt(dt);
  const double rho = setup.rho;
  const double rho_perp = std::sqrt((1.0 - rho) * (1.0 + rho));
  const double mu_s = setup.drift(Asset::Equity);
  const double mu_x = setup.drift(Asset::Fx);
  const double ln_s0 = std::log(setup.spot_S);
  const double ln_x0 = std::log(setup.spot_X);

  auto simulate = [&](std::mt19937_64& rng, std::vector<double>& out) {
    std::normal_distribution<double> normal;
    for (double& st : out) {
      double ln_s = ln_s0;
      double ln_x = ln_x0;
      for (int i = 0; i < steps; ++i) {
        const double t = (i + 0.5) * dt;
        const double vs = equity.local_vol(std::exp(ln_s), t);
        const double vx = fx.local_vol(std::exp(ln_x), t);
        const double e1 = normal(rng);
        const double e2 = normal(rng);
        ln_s += (mu_s + rho * vx * vs - 0.5 * vs * vs) * dt + vs * sq * e1;
        ln_x += (mu_x + 0.5 * vx * vx) * dt + vx * sq * (rho * e1 + rho_perp * e2);
      }
      st = std::exp(ln_s);
    }
  };
  return run_chunks(spec, setup.domestic_discount(T), strikes, simulate);
}

McEstimate mc_quanto_price(const MarketSetup& setup, const VolSurface& equity, const VolSurface& fx,
                           double T, double K, McSpec spec) {
  const double strikes[] = {K};
  return mc_quanto_prices(setup, equity, fx, T, strikes, spec).front();
}

std::vector<McEstimate> mc_local_drift_quanto_prices(const MarketSetup& setup,
                                                     const VolSurface& equity,
                                                     const VolSurface& fx, double T,
                                                     std::span<const double> strikes, int N_t,
                                                     McSpec spec) {
  setup.validate();
  const int steps = step_count(T, spec.steps_per_year);
  const double dt = T / steps;
  const double sq = std::sqrt(dt);
  const double mu_s = setup.drift(Asset::Equity);
  const double ln_s0 = std::log(setup.spot_S);

  std::vector<DriftSlice> slices;
  slices.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) slices.push_back(fit_drift_slice(fx, equity, setup, (i + 0.5) * dt, N_t));

  auto simulate = [&](std::mt19937_64& rng, std::vector<double>& out) {
    std::normal_distribution<double> normal;
    for (double& st : out) {
      double ln_s = ln_s0;
      for (int i = 0; i < steps; ++i) {
        const DriftSlice& slice = slices[static_cast<std::size_t>(i)];
        const StrikeBounds bounds = slice.equity_marginal().bounds();
        const double s = std::clamp(std::exp(ln_s), bounds.lo, bounds.hi);
        const double t = slice.time();
        const double vs = equity.local_vol(s, t);
        const double drift = slice.rho() * vs * conditional_fx_vol(slice, s);
        ln_s += (mu_s + drift - 0.5 * vs * vs) * dt + vs * sq * normal(rng);
      }
      st = std::exp(ln_s);
    }
  };
  return run_chunks(spec, setup.domestic_discount(T), strikes, simulate);
}

}  // namespace qcoll
