#include "qcoll/collocation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qcoll/errors.hpp"
#include "qcoll/normal.hpp"

namespace qcoll {

namespace {

constexpr int kMaxConditionalPower = 30;

// He_N(x) and He_{N-1}(x) by the three-term recurrence.
std::pair<double, double> hermite_pair(int n, double x) {
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = x * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace

PolyCoeffs::PolyCoeffs(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

double PolyCoeffs::eval(double z) const {
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

double PolyCoeffs::derivative(double z) const {
  double acc = 0.0;
  for (std::size_t n = c_.size(); n-- > 1;) acc = acc * z + static_cast<double>(n) * c_[n];
  return acc;
}

double PolyCoeffs::normal_mean() const {
  double m = 0.0;
  for (std::size_t n = 0; n < c_.size(); n += 2) m += c_[n] * normal_raw_moment(static_cast<int>(n));
  return m;
}

double eval_poly(const PolyCoeffs& p, double z) { return p.eval(z); }

CollocationBasis::CollocationBasis(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  const int n = order();
  v_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j < n; ++j) {
      v_(i, j) = p;
      p *= nodes_[static_cast<std::size_t>(i)];
    }
  }
  lu_.compute(v_);
}

PolyCoeffs CollocationBasis::solve(std::span<const double> values) const {
  const int n = order();
  Eigen::Map<const Eigen::VectorXd> u(values.data(), n);
  Eigen::VectorXd a = lu_.solve(u);
  // One step of iterative refinement; V is ill-conditioned for large N.
  const Eigen::VectorXd r = u - v_ * a;
  a += lu_.solve(r);
  return PolyCoeffs(std::vector<double>(a.data(), a.data() + n));
}

CollocationBasis hermite_nodes(int N) {
  if (N < kMinCollocationOrder || N > kMaxCollocationOrder)
    throw DomainError("hermite_nodes: order must lie in [2, 16], got " + std::to_string(N));

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd off(N - 1);
  for (int k = 1; k < N; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);

  std::vector<double> x(solver.eigenvalues().data(), solver.eigenvalues().data() + N);
  std::sort(x.begin(), x.end());
  for (double& xi : x) {
    for (int it = 0; it < 3; ++it) {
      const auto [h, hm1] = hermite_pair(N, xi);
      xi -= h / (N * hm1);
    }
  }
  for (int i = 0; i < N / 2; ++i) {
    const double m = 0.5 * (x[static_cast<std::size_t>(N - 1 - i)] - x[static_cast<std::size_t>(i)]);
    x[static_cast<std::size_t>(i)] = -m;
    x[static_cast<std::size_t>(N - 1 - i)] = m;
  }
  if (N % 2 == 1) x[static_cast<std::size_t>(N / 2)] = 0.0;
  return CollocationBasis(std::move(x));
}

PolyCoeffs solve_vandermonde(const CollocationBasis& basis, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(basis.order()))
    throw DomainError("solve_vandermonde: expected " + std::to_string(basis.order()) + " values");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("solve_vandermonde: non-finite value");
  return basis.solve(values);
}

PolyCoeffs fit_marginal(const MarginalDistribution& dist, const CollocationBasis& basis) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(basis.order()));
  for (double x : basis.nodes()) {
    const QuantileResult q = dist.quantile_of_normal(x);
    if (q.saturated) {
      std::ostringstream os;
      os << "fit_marginal: " << to_string(dist.asset()) << " node z=" << x << " at T="
         << dist.maturity() << " maps outside the strike bounds [" << dist.bounds().lo << ", "
         << dist.bounds().hi << "]; widen K_lo/K_hi";
      throw TailCoverageError(os.str());
    }
    if (!values.empty() && !(q.strike > values.back()))
      throw DomainError("fit_marginal: quantile map is not increasing across nodes");
    values.push_back(q.strike);
  }
  return solve_vandermonde(basis, values);
}

double min_derivative(const PolyCoeffs& p, double lo, double hi) {
  constexpr int kPoints = 801;
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kPoints; ++i) m = std::min(m, p.derivative(lo + (hi - lo) * i / (kPoints - 1)));
  return m;
}

std::vector<double> conditional_moment_coeffs(int n, double rho) {
  if (n < 0 || n > kMaxConditionalPower)
    throw DomainError("conditional_moment_coeffs: power must lie in [0, 30]");
  if (!(std::abs(rho) <= 1.0)) throw DomainError("conditional_moment_coeffs: |rho| must be <= 1");
  std::vector<double> q(static_cast<std::size_t>(n + 1), 0.0);
  const double var = (1.0 - rho) * (1.0 + rho);
  double dfact = 1.0;  // (2j - 1)!!, with (-1)!! = 1
  double var_pow = 1.0;
  for (int j = 0; 2 * j <= n; ++j) {
    if (j > 0) {
      dfact *= 2 * j - 1;
      var_pow *= var;
    }
    const int i = n - 2 * j;
    q[static_cast<std::size_t>(i)] = binomial(n, 2 * j) * dfact * var_pow * std::pow(rho, i);
  }
  return q;
}

ConditionalMomentTable::ConditionalMomentTable(int n_max, double rho)
    : n_max_(n_max), rho_(rho),
      table_(static_cast<std::size_t>((n_max + 1) * (n_max + 1)), 0.0) {
  for (int n = 0; n <= n_max; ++n) {
    const std::vector<double> q = conditional_moment_coeffs(n, rho);
    std::copy(q.begin(), q.end(), table_.begin() + n * (n_max + 1));
  }
}

PolyCoeffs condition_coeffs(const PolyCoeffs& a, double rho) {
  const int n1 = static_cast<int>(a.size());
  if (n1 == 0) return a;
  const ConditionalMomentTable table(n1 - 1, rho);
  std::vector<double> b(static_cast<std::size_t>(n1), 0.0);
  for (int n = 0; n < n1; ++n) {
    double acc = 0.0;
    for (int j = n; j < n1; ++j) acc += a[static_cast<std::size_t>(j)] * table.q(n, j);
    b[static_cast<std::size_t>(n)] = acc;
  }
  return PolyCoeffs(std::move(b));
}

PolyCoeffs convolve(const PolyCoeffs& a, const PolyCoeffs& b) {
  if (a.size() == 0 || b.size() == 0) return PolyCoeffs();
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return PolyCoeffs(std::move(c));
}

}  // namespace qcoll
