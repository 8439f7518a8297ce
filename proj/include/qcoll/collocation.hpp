#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "qcoll/market_surface.hpp"

namespace qcoll {

// Coefficients of a polynomial in a standard-normal variable; index = power.
class PolyCoeffs {
 public:
  PolyCoeffs() = default;
  explicit PolyCoeffs(std::vector<double> coeffs);

  std::size_t size() const { return c_.size(); }
  double operator[](std::size_t n) const { return c_[n]; }
  std::span<const double> coeffs() const { return c_; }
  const std::vector<double>& vector() const { return c_; }

  double eval(double z) const;
  double derivative(double z) const;
  // E[p(Z)] for Z ~ N(0, 1).
  double normal_mean() const;

  bool operator==(const PolyCoeffs&) const = default;

 private:
  std::vector<double> c_;
};

// Horner evaluation.
double eval_poly(const PolyCoeffs& p, double z);

// Order-N collocation nodes (zeros of the probabilists' Hermite He_N) with the
// LU-factorized Vandermonde matrix V[i][j] = x_i^j.
class CollocationBasis {
 public:
  explicit CollocationBasis(std::vector<double> nodes);

  int order() const { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const { return nodes_; }
  const Eigen::MatrixXd& vandermonde() const { return v_; }

  PolyCoeffs solve(std::span<const double> values) const;

 private:
  std::vector<double> nodes_;
  Eigen::MatrixXd v_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline constexpr int kMinCollocationOrder = 2;
inline constexpr int kMaxCollocationOrder = 16;

// Golub-Welsch eigenvalues of the He_N Jacobi matrix, Newton-polished and
// symmetrized. 2 <= N <= 16.
CollocationBasis hermite_nodes(int N);

// Interpolating polynomial through (x_i, values[i]). Rejects non-finite values.
PolyCoeffs solve_vandermonde(const CollocationBasis& basis, std::span<const double> values);

// Polynomial g^(z) ~ F^{-1}(Phi(z)) interpolating the exact quantile map at the
// nodes. Throws TailCoverageError if a node saturates at the strike bounds.
PolyCoeffs fit_marginal(const MarginalDistribution& dist, const CollocationBasis& basis);

// min g^'(z) over [lo, hi] sampled on a fine grid; the collocation polynomial is
// not forced to be monotone between nodes.
double min_derivative(const PolyCoeffs& p, double lo = -4.0, double hi = 4.0);

// Coefficients q_0..q_n with E[Z1^n | Z2 = z] = sum_i q_i z^i for standard
// normals with correlation rho. 0 <= n <= 30.
std::vector<double> conditional_moment_coeffs(int n, double rho);

// q_i(n; rho) for all 0 <= i <= n <= n_max.
class ConditionalMomentTable {
 public:
  ConditionalMomentTable(int n_max, double rho);

  int max_power() const { return n_max_; }
  double rho() const { return rho_; }
  double q(int i, int n) const { return table_[static_cast<std::size_t>(n * (n_max_ + 1) + i)]; }

 private:
  int n_max_;
  double rho_;
  std::vector<double> table_;
};

// b_n = sum_{j >= n} a_j q_n(j; rho): the polynomial in Z2 equal to E[a(Z1) | Z2].
PolyCoeffs condition_coeffs(const PolyCoeffs& a, double rho);

// Coefficients of the product polynomial, length len(a) + len(b) - 1.
PolyCoeffs convolve(const PolyCoeffs& a, const PolyCoeffs& b);

}  // namespace qcoll
