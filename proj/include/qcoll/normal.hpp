#pragma once

namespace qcoll {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Standard normal density.
double norm_pdf(double x);
// Standard normal CDF, erfc-based so both tails keep relative precision.
double norm_cdf(double x);
// Inverse CDF. Accurate to a few ulps in both tails; p must be in (0, 1).
double norm_inv(double p);
// Upper-tail inverse: returns z with 1 - Phi(z) = p, without forming 1 - p.
double norm_inv_upper(double p);

// Raw moments of N(0, 1): (n-1)!! for even n, 0 for odd n.
double normal_raw_moment(int n);

// Undiscounted Black call on a forward. `stdev` is sigma * sqrt(T).
double black_call(double forward, double strike, double stdev);
// dC/dsigma for the undiscounted Black call, per unit of sigma.
double black_vega(double forward, double strike, double sigma, double T);

}  // namespace qcoll
