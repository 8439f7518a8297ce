#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qcoll/market_io.hpp"
#include "qcoll/market_surface.hpp"

namespace qcoll::testing {

inline std::string data_path(const std::string& name) { return std::string(QCOLL_TEST_DATA_DIR) + "/" + name; }

// Market files under tests/data: flat, pos_skew, neg_skew, mixed.
inline Market fixture(const std::string& name) { return load_market(data_path(name + ".json")); }

inline const std::vector<std::string>& skewed_fixtures() {
  static const std::vector<std::string> names{"pos_skew", "neg_skew", "mixed"};
  return names;
}

// Flat-vol surface with bounds at +-8 standard deviations around the median.
inline VolSurface flat_surface(const MarketSetup& setup, Asset asset, double sigma) {
  std::vector<SmilePillar> pillars;
  for (double T : {0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0}) {
    const double f = forward(setup, asset, T);
    const double theta = sigma * std::sqrt(T);
    const double m = -0.5 * theta * theta;
    pillars.push_back({T, {sigma, 0.0, 0.0}, f * std::exp(m - 8.0 * theta), f * std::exp(m + 8.0 * theta)});
  }
  return VolSurface(setup, asset, pillars);
}

inline Market flat_market(const MarketSetup& setup, double sigma_S, double sigma_X) {
  return {setup, flat_surface(setup, Asset::Equity, sigma_S), flat_surface(setup, Asset::Fx, sigma_X)};
}

inline MarketSetup plain_setup(double rho) {
  MarketSetup s;
  s.rho = rho;
  return s;
}

}  // namespace qcoll::testing
