#include "qcoll/normal.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace qcoll {

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_inv(double p) {
  if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
  if (p > 0.5) return norm_inv_upper(1.0 - p);
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double norm_inv_upper(double p) {
  if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
  if (p > 0.5) return -norm_inv_upper(1.0 - p);
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_raw_moment(int n) {
  if (n < 0 || n % 2 != 0) return 0.0;
  double m = 1.0;
  for (int k = n - 1; k > 1; k -= 2) m *= k;
  return m;
}

double black_call(double forward, double strike, double stdev) {
  if (strike <= 0.0) return forward;
  if (stdev <= 0.0) return std::max(forward - strike, 0.0);
  const double k = std::log(strike / forward);
  const double d1 = -k / stdev + 0.5 * stdev;
  const double d2 = d1 - stdev;
  return forward * norm_cdf(d1) - strike * norm_cdf(d2);
}

double black_vega(double forward, double strike, double sigma, double T) {
  if (strike <= 0.0 || sigma <= 0.0 || T <= 0.0) return 0.0;
  const double stdev = sigma * std::sqrt(T);
  const double d1 = std::log(forward / strike) / stdev + 0.5 * stdev;
  return forward * norm_pdf(d1) * std::sqrt(T);
}

}  // namespace qcoll
